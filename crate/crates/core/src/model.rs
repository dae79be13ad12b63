//! Parameter storage and the full model: per-modality TCN encoders followed
//! by the RJCMA block and regression head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check_with_fault, Fault, Graph, Var};
use crate::data::{window, SequenceRecord, WindowSpec};
use crate::error::{Error, Result};
use crate::fusion::{rjcma_forward, FusionConfig, FusionOutput, FusionWeights, Modality};
use crate::metrics::{ccc_loss, Predictor};
use crate::temporal::{tcn_forward, TcnStack, TcnWeights, TemporalConfig};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform in `[-bound, bound]`.
    Uniform(f64),
}

/// Receives parameter declarations while a layout is being built.
pub trait ParamSink {
    fn declare(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Result<usize>;
}

/// Named parameter tensors in declaration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.values[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.values[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

struct Initializer<'a, R> {
    store: &'a mut ParamStore,
    rng: &'a mut R,
}

impl<R: Rng> ParamSink for Initializer<'_, R> {
    fn declare(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Result<usize> {
        let value = match init {
            Init::Zeros => Tensor::zeros(rows, cols),
            Init::Uniform(bound) => Tensor::from_fn(rows, cols, |_, _| self.rng.random_range(-bound..=bound)),
        };
        Ok(self.store.push(name, value))
    }
}

/// Resolves declarations against an existing store, checking names and shapes.
struct Resolver<'a> {
    store: &'a ParamStore,
    next: usize,
}

impl ParamSink for Resolver<'_> {
    fn declare(&mut self, name: &str, rows: usize, cols: usize, _init: Init) -> Result<usize> {
        let index = self.next;
        let (Some(found), Some(value)) = (self.store.names.get(index), self.store.values.get(index)) else {
            return Err(Error::Contract(format!("parameter `{name}` missing from store")));
        };
        if found != name {
            return Err(Error::Contract(format!("expected parameter `{name}` at position {index}, found `{found}`")));
        }
        if value.shape() != (rows, cols) {
            return Err(Error::shape("parameter", value.shape(), (rows, cols)));
        }
        self.next += 1;
        Ok(index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub fusion: FusionConfig,
    pub temporal: TemporalConfig,
}

impl ModelConfig {
    pub fn stacks(&self) -> [TcnStack; 3] {
        self.fusion.dims().map(|d| self.temporal.stack(d))
    }

    pub fn parameter_count(&self) -> usize {
        self.fusion.parameter_count() + self.stacks().iter().map(TcnStack::parameter_count).sum::<usize>()
    }
}

/// Store indices for every tensor of a model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelLayout {
    pub tcn: [TcnWeights<usize>; 3],
    pub fusion: FusionWeights<usize>,
}

impl ModelLayout {
    fn declare(cfg: &ModelConfig, sink: &mut impl ParamSink) -> Result<Self> {
        let [sa, sv, st] = cfg.stacks();
        let tcn = [
            TcnWeights::declare(&sa, "tcn.a", sink)?,
            TcnWeights::declare(&sv, "tcn.v", sink)?,
            TcnWeights::declare(&st, "tcn.t", sink)?,
        ];
        let fusion = FusionWeights::declare(&cfg.fusion, sink)?;
        Ok(Self { tcn, fusion })
    }
}

/// Model weights bound to one graph.
#[derive(Clone, Debug)]
pub struct BoundModel {
    pub vars: Vec<Var>,
    pub tcn: [TcnWeights<Var>; 3],
    pub fusion: FusionWeights<Var>,
}

#[derive(Clone, Debug)]
pub struct ModelOutput {
    /// TCN outputs fed into the fusion block.
    pub encoded: [Var; 3],
    pub fusion: FusionOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    layout: ModelLayout,
}

impl Model {
    /// Fresh weights drawn from a ChaCha stream seeded with `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let layout = ModelLayout::declare(&config, &mut Initializer { store: &mut store, rng: &mut rng })?;
        Ok(Self { config, store, layout })
    }

    /// Wraps an existing store, e.g. one read from a checkpoint.
    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let mut resolver = Resolver { store: &store, next: 0 };
        let layout = ModelLayout::declare(&config, &mut resolver)?;
        if resolver.next != store.len() {
            return Err(Error::Contract(format!(
                "store holds {} tensors, model declares {}",
                store.len(),
                resolver.next
            )));
        }
        Ok(Self { config, store, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    /// Puts every parameter on `g`, trainable or frozen.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundModel {
        let vars: Vec<Var> = self
            .store
            .values()
            .iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        self.bind_vars(vars)
    }

    /// Maps already-registered leaves (one per store entry) onto the layout.
    pub fn bind_vars(&self, vars: Vec<Var>) -> BoundModel {
        let tcn = [
            self.layout.tcn[0].map(|i| vars[i]),
            self.layout.tcn[1].map(|i| vars[i]),
            self.layout.tcn[2].map(|i| vars[i]),
        ];
        let fusion = self.layout.fusion.map(|i| vars[i]);
        BoundModel { vars, tcn, fusion }
    }

    pub fn forward(&self, g: &mut Graph, bound: &BoundModel, inputs: [Var; 3]) -> Result<ModelOutput> {
        let stacks = self.config.stacks();
        let mut encoded = inputs;
        for m in Modality::ALL {
            let i = m.index();
            encoded[i] = tcn_forward(g, inputs[i], &stacks[i], &bound.tcn[i])?;
        }
        let fusion = rjcma_forward(g, encoded, &bound.fusion, &self.config.fusion)?;
        Ok(ModelOutput { encoded, fusion })
    }

    /// Per-frame predictions for one window.
    pub fn predict(&self, features: [&Tensor; 3]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let inputs = features.map(|f| g.constant(f.clone()));
        let out = self.forward(&mut g, &bound, inputs)?;
        Ok(g.value(out.fusion.predictions).data().to_vec())
    }

    /// CCC loss on one window and its gradient for every store entry.
    pub fn loss_and_grads(&self, features: [&Tensor; 3], labels: &[f64], mask: &[bool]) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true);
        let inputs = features.map(|f| g.constant(f.clone()));
        let out = self.forward(&mut g, &bound, inputs)?;
        let loss = ccc_loss(&mut g, out.fusion.predictions, labels, mask)?;
        let value = g.value(loss).get(0, 0);
        let mut grads = g.backward(loss)?;
        let grads = bound.vars.iter().map(|&v| grads.take(v).expect("param gradient")).collect();
        Ok((value, grads))
    }
}

/// Per-tensor result of a finite-difference check on the whole model.
#[derive(Clone, Debug, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelGradCheck {
    pub h: f64,
    pub tol: f64,
    pub max_rel_err: f64,
    pub passed: bool,
    pub params: Vec<NamedCheck>,
}

impl ModelGradCheck {
    pub fn render(&self) -> String {
        let width = self.params.iter().map(|p| p.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}  {:>8}  {:>12}  {:>12}\n", "name", "elements", "max rel err", "max abs err");
        for p in &self.params {
            let flag = if p.max_rel_err < self.tol { "" } else { "  FAIL" };
            out.push_str(&format!(
                "{:<width$}  {:>8}  {:>12.3e}  {:>12.3e}{flag}\n",
                p.name, p.elements, p.max_rel_err, p.max_abs_err
            ));
        }
        out.push_str(&format!(
            "max relative error {:.3e} (tol {:.0e}): {}\n",
            self.max_rel_err,
            self.tol,
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// Checks every parameter gradient of TCN + RJCMA + head under the CCC loss
/// against central differences on one random window.
///
/// Inputs are drawn from a seeded stream; about one label in eight is the
/// missing sentinel so the masked path is exercised too.
///
/// The check runs at a generic point rather than at the training init: every
/// tensor is redrawn uniform in +-1/sqrt(cols). At the 1e-2 attention init
/// many gradient entries are ~1e-10, below the round-off floor of a central
/// difference on an O(1) loss, and the relative error then measures noise.
pub fn check_model_gradients(
    cfg: &ModelConfig,
    seed: u64,
    h: f64,
    tol: f64,
    fault: Option<Fault>,
) -> Result<ModelGradCheck> {
    let k = cfg.fusion.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::init(cfg.clone(), seed)?;
    // Redraw until no ReLU input lies within KINK_MARGIN of zero, so the
    // stencil never crosses a point where the loss is not differentiable.
    let mut attempt = 0;
    let (inputs, labels) = loop {
        for p in model.store_mut().values_mut() {
            let a = 1.0 / (p.cols() as f64).sqrt();
            *p = Tensor::from_fn(p.rows(), p.cols(), |_, _| rng.random_range(-a..a));
        }
        let inputs = cfg.fusion.dims().map(|d| Tensor::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0)));
        let labels: Vec<f64> =
            (0..k).map(|t| if t % 8 == 5 { crate::data::LABEL_MISSING } else { rng.random_range(-0.9..0.9) }).collect();
        let mut g = Graph::new();
        let bound = model.bind(&mut g, false);
        let xs = inputs.each_ref().map(|x| g.constant(x.clone()));
        model.forward(&mut g, &bound, xs)?;
        if g.kink_margin() >= KINK_MARGIN {
            break (inputs, labels);
        }
        attempt += 1;
        if attempt == MAX_DRAWS {
            return Err(Error::Contract(format!(
                "no operating point {KINK_MARGIN:e} clear of ReLU kinks in {MAX_DRAWS} draws"
            )));
        }
    };
    let mask = crate::data::label_mask(&labels);
    let report = grad_check_with_fault(model.store().values(), h, tol, fault, |g, vars| {
        let bound = model.bind_vars(vars.to_vec());
        let xs = inputs.each_ref().map(|x| g.constant(x.clone()));
        let out = model.forward(g, &bound, xs)?;
        ccc_loss(g, out.fusion.predictions, &labels, &mask)
    })?;
    let params: Vec<NamedCheck> = report
        .params
        .iter()
        .map(|p| NamedCheck {
            name: model.store().names()[p.index].clone(),
            elements: p.elements,
            max_rel_err: p.max_rel_err,
            max_abs_err: p.max_abs_err,
        })
        .collect();
    Ok(ModelGradCheck { h, tol, max_rel_err: report.max_rel_err(), passed: report.passed(), params })
}

const KINK_MARGIN: f64 = 1e-3;
const MAX_DRAWS: usize = 256;

impl Predictor for Model {
    /// Tiles the sequence with non-overlapping windows of the model's length
    /// and keeps the predictions for real (unpadded) frames.
    fn predict_sequence(&self, record: &SequenceRecord) -> Result<Vec<f64>> {
        let spec = WindowSpec::tiling(self.config.fusion.window);
        let mut out = Vec::with_capacity(record.frames());
        for w in window(record, &spec)? {
            let pred = self.predict(w.feature_refs())?;
            out.extend_from_slice(&pred[..w.len() - w.padded]);
        }
        Ok(out)
    }
}
