//! Causal dilated temporal convolutions applied to each modality before
//! fusion.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::{Init, ParamSink};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnBlockConfig {
    pub channels_in: usize,
    pub channels_out: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub residual: bool,
}

impl TcnBlockConfig {
    /// Zero frames prepended so output frame `t` sees inputs `<= t` only.
    pub fn causal_padding(&self) -> usize {
        (self.kernel_size - 1) * self.dilation
    }

    fn has_residual(&self) -> bool {
        self.residual && self.channels_in == self.channels_out
    }
}

/// Shape of the per-modality temporal encoder. Channels are preserved, so
/// each block maps `d_m -> d_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
    pub residual: bool,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self { kernel_size: 3, dilations: vec![1, 2], residual: true }
    }
}

impl TemporalConfig {
    pub fn stack(&self, channels: usize) -> TcnStack {
        TcnStack {
            blocks: self
                .dilations
                .iter()
                .map(|&dilation| TcnBlockConfig {
                    channels_in: channels,
                    channels_out: channels,
                    kernel_size: self.kernel_size,
                    dilation,
                    residual: self.residual,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnStack {
    pub blocks: Vec<TcnBlockConfig>,
}

impl TcnStack {
    pub fn new(blocks: Vec<TcnBlockConfig>) -> Result<Self> {
        let stack = Self { blocks };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel_size == 0 || b.dilation == 0 || b.channels_in == 0 || b.channels_out == 0 {
                return Err(Error::Config(format!("tcn block {i}: sizes must be positive")));
            }
            if let Some(next) = self.blocks.get(i + 1) {
                if next.channels_in != b.channels_out {
                    return Err(Error::Config(format!(
                        "tcn block {}: expects {} channels, previous block emits {}",
                        i + 1,
                        next.channels_in,
                        b.channels_out
                    )));
                }
            }
        }
        Ok(())
    }

    /// `1 + Σ (kernel_size - 1) · dilation`.
    pub fn receptive_field(&self) -> usize {
        1 + self.blocks.iter().map(TcnBlockConfig::causal_padding).sum::<usize>()
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.kernel_size * b.channels_out * b.channels_in + b.channels_out).sum()
    }
}

/// One tensor per tap (`c_out x c_in`), oldest tap first, plus a bias column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvWeights<T> {
    pub taps: Vec<T>,
    pub bias: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TcnWeights<T> {
    pub blocks: Vec<ConvWeights<T>>,
}

impl<T: Copy> TcnWeights<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> TcnWeights<U> {
        TcnWeights {
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvWeights { taps: b.taps.iter().map(|&t| f(t)).collect(), bias: f(b.bias) })
                .collect(),
        }
    }
}

impl TcnWeights<usize> {
    pub fn declare(stack: &TcnStack, prefix: &str, sink: &mut impl ParamSink) -> Result<Self> {
        stack.validate()?;
        let blocks = stack
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let bound = 1.0 / ((b.channels_in * b.kernel_size) as f64).sqrt();
                let taps = (0..b.kernel_size)
                    .map(|k| {
                        sink.declare(
                            &format!("{prefix}.block{i}.tap{k}"),
                            b.channels_out,
                            b.channels_in,
                            Init::Uniform(bound),
                        )
                    })
                    .collect::<Result<_>>()?;
                let bias = sink.declare(&format!("{prefix}.block{i}.bias"), b.channels_out, 1, Init::Uniform(bound))?;
                Ok(ConvWeights { taps, bias })
            })
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }
}

/// `y[:, t] = b + Σ_k W_k · x[:, t - (kernel_size - 1 - k) · dilation]`, with
/// frames before 0 read as zeros. Output length equals input length.
pub fn causal_dilated_conv(g: &mut Graph, x: Var, weights: &ConvWeights<Var>, cfg: &TcnBlockConfig) -> Result<Var> {
    let (rows, frames) = g.shape(x);
    if frames == 0 {
        return Err(Error::EmptyInput("causal_dilated_conv"));
    }
    if rows != cfg.channels_in {
        return Err(Error::shape("causal_dilated_conv", (rows, frames), (cfg.channels_in, frames)));
    }
    if weights.taps.len() != cfg.kernel_size {
        return Err(Error::Contract(format!("{} taps for kernel size {}", weights.taps.len(), cfg.kernel_size)));
    }
    let mut acc: Option<Var> = None;
    for (k, &tap) in weights.taps.iter().enumerate() {
        let shift = (cfg.kernel_size - 1 - k) * cfg.dilation;
        if shift >= frames {
            continue;
        }
        let shifted = if shift == 0 { x } else { g.shift_cols(x, shift) };
        let term = g.matmul(tap, shifted)?;
        acc = Some(match acc {
            Some(a) => g.add(a, term)?,
            None => term,
        });
    }
    let ones = g.constant(Tensor::ones(1, frames));
    let bias = g.matmul(weights.bias, ones)?;
    match acc {
        Some(a) => g.add(a, bias),
        None => Ok(bias),
    }
}

/// Applies every block: `x <- x + ReLU(conv(x))` when the block is residual
/// and preserves channels, `x <- ReLU(conv(x))` otherwise.
pub fn tcn_forward(g: &mut Graph, x: Var, stack: &TcnStack, weights: &TcnWeights<Var>) -> Result<Var> {
    if weights.blocks.len() != stack.blocks.len() {
        return Err(Error::Contract("tcn weights do not match stack".into()));
    }
    let mut h = x;
    for (cfg, w) in stack.blocks.iter().zip(&weights.blocks) {
        let conv = causal_dilated_conv(g, h, w, cfg)?;
        let act = g.relu(conv);
        h = if cfg.has_residual() { g.add(h, act)? } else { act };
    }
    Ok(h)
}
