//! The recursive joint cross-modal attention block.
//!
//! For modality features `X_m` (`d_m x K`, one column per frame):
//!
//! ```text
//! J        = FC([X_a; X_v; X_t])                      d x K,  d = d_a + d_v + d_t
//! C_m      = tanh(X_mᵀ · W_jm · J / √d)               K x K
//! H_m      = ReLU(X_m · W_cm · C_m)                   d_m x K
//! X_att,m  = H_m · W_hm + X_m                         d_m x K
//! ```
//!
//! The attended features are fed back through the block `l` times. Each
//! iteration recomputes `J` from the current features with the shared FC and
//! uses its own `W_jm`, `W_cm`, `W_hm`. The final features are stacked and
//! passed to a small MLP head that predicts one value per frame.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::{Init, ParamSink};
use crate::tensor::Tensor;

/// Scale of the uniform init for `W_c` and `W_h`, so that training starts
/// close to the residual (zero-attention) path.
pub const ATTENTION_INIT_SCALE: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Visual,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Visual, Modality::Text];

    pub fn tag(self) -> &'static str {
        match self {
            Modality::Audio => "a",
            Modality::Visual => "v",
            Modality::Text => "t",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Frame-aligned features of one modality. Frames flagged invalid in
/// `frame_mask` carry zero vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityFeatures {
    pub modality: Modality,
    pub features: Tensor,
    pub frame_mask: Vec<bool>,
}

impl ModalityFeatures {
    pub fn new(modality: Modality, features: Tensor, frame_mask: Vec<bool>) -> Result<Self> {
        if frame_mask.len() != features.cols() {
            return Err(Error::Contract(format!(
                "frame mask has {} entries for {} frames",
                frame_mask.len(),
                features.cols()
            )));
        }
        for (t, _) in frame_mask.iter().enumerate().filter(|(_, valid)| !**valid) {
            if (0..features.rows()).any(|i| features.get(i, t) != 0.0) {
                return Err(Error::Contract(format!("masked frame {t} of {modality:?} is not zero")));
            }
        }
        Ok(Self { modality, features, frame_mask })
    }

    /// Derives the mask from the data: all-zero frames are invalid.
    pub fn from_features(modality: Modality, features: Tensor) -> Self {
        let frame_mask =
            (0..features.cols()).map(|t| (0..features.rows()).any(|i| features.get(i, t) != 0.0)).collect();
        Self { modality, features, frame_mask }
    }

    pub fn frames(&self) -> usize {
        self.features.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub d_a: usize,
    pub d_v: usize,
    pub d_t: usize,
    /// Window length `K` (frames per sample).
    pub window: usize,
    /// Recursion depth `l`.
    pub iterations: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { d_a: 16, d_v: 16, d_t: 16, window: 64, iterations: 3 }
    }
}

impl FusionConfig {
    pub fn dims(&self) -> [usize; 3] {
        [self.d_a, self.d_v, self.d_t]
    }

    pub fn joint_dim(&self) -> usize {
        self.d_a + self.d_v + self.d_t
    }

    pub fn head_dims(&self) -> [usize; 3] {
        let d = self.joint_dim();
        [d, (d / 2).max(1), 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().contains(&0) || self.window == 0 {
            return Err(Error::Config("feature dims and window must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("recursion depth must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of scalar parameters in the block and head.
    pub fn parameter_count(&self) -> usize {
        let d = self.joint_dim();
        let k = self.window;
        let per_step: usize = self.dims().iter().map(|dm| dm * d + 2 * k * k).sum();
        let [h0, h1, h2] = self.head_dims();
        d * d + d + self.iterations * per_step + h1 * h0 + h1 + h2 * h1 + h2
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine<T> {
    pub weight: T,
    pub bias: T,
}

impl<T: Copy> Affine<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(T) -> U) -> Affine<U> {
        Affine { weight: f(self.weight), bias: f(self.bias) }
    }
}

/// Per-iteration, per-modality attention weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModalityWeights<T> {
    /// `d_m x d`
    pub w_j: T,
    /// `K x K`
    pub w_c: T,
    /// `K x K`
    pub w_h: T,
}

impl<T: Copy> ModalityWeights<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(T) -> U) -> ModalityWeights<U> {
        ModalityWeights { w_j: f(self.w_j), w_c: f(self.w_c), w_h: f(self.w_h) }
    }
}

/// Every learnable tensor of the block. `T` is a store index for the layout
/// and a [`Var`] once bound to a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusionWeights<T> {
    pub fc: Affine<T>,
    pub steps: Vec<[ModalityWeights<T>; 3]>,
    pub head: Vec<Affine<T>>,
}

impl<T: Copy> FusionWeights<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> FusionWeights<U> {
        FusionWeights {
            fc: self.fc.map(&mut f),
            steps: self.steps.iter().map(|s| [s[0].map(&mut f), s[1].map(&mut f), s[2].map(&mut f)]).collect(),
            head: self.head.iter().map(|a| a.map(&mut f)).collect(),
        }
    }
}

impl FusionWeights<usize> {
    /// Declares the block's parameters in a fixed order.
    pub fn declare(cfg: &FusionConfig, sink: &mut impl ParamSink) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.joint_dim();
        let k = cfg.window;
        let fc_bound = 1.0 / (d as f64).sqrt();
        let fc = Affine {
            weight: sink.declare("fusion.fc.weight", d, d, Init::Uniform(fc_bound))?,
            bias: sink.declare("fusion.fc.bias", d, 1, Init::Uniform(fc_bound))?,
        };
        let mut steps = Vec::with_capacity(cfg.iterations);
        for step in 0..cfg.iterations {
            let mut declare_modality = |m: Modality| -> Result<ModalityWeights<usize>> {
                let dm = cfg.dims()[m.index()];
                let prefix = format!("fusion.step{step}.{}", m.tag());
                Ok(ModalityWeights {
                    w_j: sink.declare(&format!("{prefix}.w_j"), dm, d, Init::Uniform(fc_bound))?,
                    w_c: sink.declare(&format!("{prefix}.w_c"), k, k, Init::Uniform(ATTENTION_INIT_SCALE))?,
                    w_h: sink.declare(&format!("{prefix}.w_h"), k, k, Init::Uniform(ATTENTION_INIT_SCALE))?,
                })
            };
            steps.push([
                declare_modality(Modality::Audio)?,
                declare_modality(Modality::Visual)?,
                declare_modality(Modality::Text)?,
            ]);
        }
        let dims = cfg.head_dims();
        let head = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Ok(Affine {
                    weight: sink.declare(&format!("fusion.head{i}.weight"), w[1], w[0], Init::Uniform(bound))?,
                    bias: sink.declare(&format!("fusion.head{i}.bias"), w[1], 1, Init::Uniform(bound))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { fc, steps, head })
    }
}

/// Column-wise affine map `W·X + b·1ᵀ`.
pub fn affine(g: &mut Graph, layer: &Affine<Var>, x: Var) -> Result<Var> {
    let wx = g.matmul(layer.weight, x)?;
    let ones = g.constant(Tensor::ones(1, g.shape(x).1));
    let bias = g.matmul(layer.bias, ones)?;
    g.add(wx, bias)
}

/// `J = FC([X_a; X_v; X_t])`.
pub fn joint_representation(g: &mut Graph, xs: [Var; 3], fc: &Affine<Var>) -> Result<Var> {
    let stacked = g.concat_rows(&xs)?;
    affine(g, fc, stacked)
}

/// `C_m = tanh(X_mᵀ · W_jm · J / √d)` with `d` the row count of `J`.
pub fn joint_cross_correlation(g: &mut Graph, xm: Var, joint: Var, w_j: Var) -> Result<Var> {
    let d = g.shape(joint).0;
    let xt = g.transpose(xm);
    let xw = g.matmul(xt, w_j)?;
    let xwj = g.matmul(xw, joint)?;
    let scaled = g.scale(xwj, 1.0 / (d as f64).sqrt());
    Ok(g.tanh(scaled))
}

/// `H_m = ReLU(X_m · W_cm · C_m)`.
pub fn attention_map(g: &mut Graph, xm: Var, correlation: Var, w_c: Var) -> Result<Var> {
    let xw = g.matmul(xm, w_c)?;
    let xwc = g.matmul(xw, correlation)?;
    Ok(g.relu(xwc))
}

/// `X_att,m = H_m · W_hm + X_m`.
pub fn attend(g: &mut Graph, attention: Var, w_h: Var, xm: Var) -> Result<Var> {
    let hw = g.matmul(attention, w_h)?;
    g.add(hw, xm)
}

/// MLP head: ReLU between layers, tanh on the single output row.
pub fn predict_head(g: &mut Graph, x_att: Var, head: &[Affine<Var>]) -> Result<Var> {
    let (last, hidden) = head.split_last().ok_or(Error::EmptyInput("predict_head"))?;
    let mut x = x_att;
    for layer in hidden {
        let z = affine(g, layer, x)?;
        x = g.relu(z);
    }
    let out = affine(g, last, x)?;
    if g.shape(out).0 != 1 {
        return Err(Error::shape("predict_head", g.shape(out), (1, g.shape(out).1)));
    }
    Ok(g.tanh(out))
}

/// Intermediates of one recursion step.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub joint: Var,
    pub correlation: [Var; 3],
    pub attention: [Var; 3],
    pub attended: [Var; 3],
}

#[derive(Clone, Debug)]
pub struct FusionOutput {
    /// `[X_att,a; X_att,v; X_att,t]` after the last step, `d x K`.
    pub attended: Var,
    /// Per-frame predictions in `[-1, 1]`, `1 x K`.
    pub predictions: Var,
    pub steps: Vec<StepTrace>,
}

/// One pass of joint cross-modal attention over all three modalities.
pub fn jca_step(g: &mut Graph, xs: [Var; 3], fc: &Affine<Var>, w: &[ModalityWeights<Var>; 3]) -> Result<StepTrace> {
    let joint = joint_representation(g, xs, fc)?;
    let mut correlation = [joint; 3];
    let mut attention = [joint; 3];
    let mut attended = [joint; 3];
    for m in 0..3 {
        correlation[m] = joint_cross_correlation(g, xs[m], joint, w[m].w_j)?;
        attention[m] = attention_map(g, xs[m], correlation[m], w[m].w_c)?;
        attended[m] = attend(g, attention[m], w[m].w_h, xs[m])?;
    }
    Ok(StepTrace { joint, correlation, attention, attended })
}

pub fn rjcma_forward(
    g: &mut Graph,
    xs: [Var; 3],
    weights: &FusionWeights<Var>,
    cfg: &FusionConfig,
) -> Result<FusionOutput> {
    cfg.validate()?;
    if weights.steps.len() != cfg.iterations {
        return Err(Error::Contract(format!(
            "weights hold {} recursion steps, config asks for {}",
            weights.steps.len(),
            cfg.iterations
        )));
    }
    for (m, &dm) in cfg.dims().iter().enumerate() {
        let shape = g.shape(xs[m]);
        if shape != (dm, cfg.window) {
            return Err(Error::shape("rjcma_forward", shape, (dm, cfg.window)));
        }
    }
    let mut current = xs;
    let mut steps = Vec::with_capacity(cfg.iterations);
    for step_weights in &weights.steps {
        let trace = jca_step(g, current, &weights.fc, step_weights)?;
        current = trace.attended;
        steps.push(trace);
    }
    let attended = g.concat_rows(&current)?;
    let predictions = predict_head(g, attended, &weights.head)?;
    Ok(FusionOutput { attended, predictions, steps })
}
