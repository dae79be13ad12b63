//! Sequences, windows and masks.
//!
//! Labels use `-5` as the "not annotated" sentinel. Such frames, and frames
//! added when padding the tail window, are excluded from losses and metrics.

mod folds;
mod manifest;
mod mmf;
mod normalize;
mod synthetic;

pub use folds::{make_folds, make_folds_with_canonical, Folds};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use mmf::{decode_features, encode_features, read_features, write_features, MMF_MAGIC};
pub use normalize::{ModalityStats, NormTarget, Normalizer};
pub use synthetic::{generate_synthetic, LabelMap, SyntheticConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Modality;
use crate::metrics::Target;
use crate::tensor::Tensor;

/// Label value marking frames without an annotation.
pub const LABEL_MISSING: f64 = -5.0;

pub fn is_valid_label(v: f64) -> bool {
    v.is_finite() && v != LABEL_MISSING
}

/// `true` where a label is annotated.
pub fn label_mask(labels: &[f64]) -> Vec<bool> {
    labels.iter().map(|&v| is_valid_label(v)).collect()
}

/// A full-length recording with three frame-synchronized feature streams.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRecord {
    pub id: String,
    /// Audio, visual, text; each `d_m x T`.
    pub features: [Tensor; 3],
    pub valence: Vec<f64>,
    pub arousal: Vec<f64>,
    pub fps: f64,
}

impl SequenceRecord {
    pub fn frames(&self) -> usize {
        self.valence.len()
    }

    pub fn labels(&self, target: Target) -> &[f64] {
        match target {
            Target::Valence => &self.valence,
            Target::Arousal => &self.arousal,
        }
    }

    pub fn modality(&self, m: Modality) -> &Tensor {
        &self.features[m.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.valence.len();
        if t == 0 {
            return Err(Error::EmptyInput("sequence"));
        }
        if self.arousal.len() != t {
            return Err(Error::Contract(format!(
                "{}: {} valence vs {} arousal labels",
                self.id,
                t,
                self.arousal.len()
            )));
        }
        for (m, f) in Modality::ALL.iter().zip(&self.features) {
            if f.cols() != t {
                return Err(Error::Contract(format!("{}: {m:?} has {} frames, labels have {t}", self.id, f.cols())));
            }
        }
        for &v in self.valence.iter().chain(&self.arousal) {
            if v != LABEL_MISSING && !(v.is_finite() && (-1.0..=1.0).contains(&v)) {
                return Err(Error::Contract(format!("{}: label {v} outside [-1, 1] and not -5", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PadPolicy {
    /// Repeat the last real frame; padded labels are masked.
    #[default]
    RepeatLast,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Window length `K`.
    pub length: usize,
    pub stride: usize,
    #[serde(default)]
    pub pad: PadPolicy,
}

impl WindowSpec {
    pub fn new(length: usize, stride: usize) -> Result<Self> {
        let spec = Self { length, stride, pad: PadPolicy::RepeatLast };
        spec.validate()?;
        Ok(spec)
    }

    /// Non-overlapping windows, used at evaluation time.
    pub fn tiling(length: usize) -> Self {
        Self { length, stride: length, pad: PadPolicy::RepeatLast }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.length {
            return Err(Error::Config(format!("window stride must be in 1..={}, got {}", self.length, self.stride)));
        }
        Ok(())
    }

    pub fn count(&self, frames: usize) -> usize {
        if frames <= self.length {
            1
        } else {
            (frames - self.length).div_ceil(self.stride) + 1
        }
    }
}

/// A fixed-length slice of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub sequence: String,
    pub offset: usize,
    /// Trailing frames that repeat the last real frame.
    pub padded: usize,
    pub features: [Tensor; 3],
    pub valence: Vec<f64>,
    pub arousal: Vec<f64>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    pub fn labels(&self, target: Target) -> &[f64] {
        match target {
            Target::Valence => &self.valence,
            Target::Arousal => &self.arousal,
        }
    }

    pub fn feature_refs(&self) -> [&Tensor; 3] {
        [&self.features[0], &self.features[1], &self.features[2]]
    }
}

/// Cuts a sequence into windows starting at `0, stride, 2·stride, …`. The
/// last window is padded by repeating the final frame when it runs past the
/// end, and a sequence shorter than the window yields one padded window.
pub fn window(rec: &SequenceRecord, spec: &WindowSpec) -> Result<Vec<Window>> {
    spec.validate()?;
    rec.validate()?;
    let total = rec.frames();
    let k = spec.length;
    let windows = (0..spec.count(total))
        .map(|w| {
            let offset = w * spec.stride;
            let real = (total - offset).min(k);
            let src = |t: usize| offset + t.min(real - 1);
            let features = rec.features.each_ref().map(|f| Tensor::from_fn(f.rows(), k, |i, t| f.get(i, src(t))));
            Window {
                sequence: rec.id.clone(),
                offset,
                padded: k - real,
                features,
                valence: (0..k).map(|t| rec.valence[src(t)]).collect(),
                arousal: (0..k).map(|t| rec.arousal[src(t)]).collect(),
            }
        })
        .collect();
    Ok(windows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowMasks {
    /// Per modality: `false` where the frame is an all-zero (dropped) vector.
    pub frames: [Vec<bool>; 3],
    pub valence: Vec<bool>,
    pub arousal: Vec<bool>,
}

impl WindowMasks {
    pub fn labels(&self, target: Target) -> &[bool] {
        match target {
            Target::Valence => &self.valence,
            Target::Arousal => &self.arousal,
        }
    }
}

pub fn build_masks(w: &Window) -> WindowMasks {
    let k = w.len();
    let real = k - w.padded;
    let labels = |l: &[f64]| l.iter().enumerate().map(|(t, &v)| t < real && is_valid_label(v)).collect();
    let frames = w.features.each_ref().map(|f| (0..k).map(|t| (0..f.rows()).any(|i| f.get(i, t) != 0.0)).collect());
    WindowMasks { frames, valence: labels(&w.valence), arousal: labels(&w.arousal) }
}
