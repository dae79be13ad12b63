use serde::{Deserialize, Serialize};

use super::SequenceRecord;
use crate::error::{Error, Result};
use crate::fusion::Modality;
use crate::tensor::Tensor;

/// Desired per-dimension mean and standard deviation after normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTarget {
    pub mean: f64,
    pub std: f64,
}

impl NormTarget {
    /// Audio and visual streams go to mean 0.5 / std 0.5, text to 0 / 1.
    pub fn for_modality(m: Modality) -> Self {
        match m {
            Modality::Audio | Modality::Visual => Self { mean: 0.5, std: 0.5 },
            Modality::Text => Self { mean: 0.0, std: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityStats {
    pub mean: Vec<f64>,
    /// Zero marks a constant dimension, which is only re-centred.
    pub std: Vec<f64>,
    pub target: NormTarget,
}

impl ModalityStats {
    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.mean.len() {
            return Err(Error::shape("normalize", x.shape(), (self.mean.len(), x.cols())));
        }
        let mut out = x.clone();
        for t in 0..x.cols() {
            if is_dropped(x, t) {
                continue;
            }
            for i in 0..x.rows() {
                let centred = x.get(i, t) - self.mean[i];
                let scaled = if self.std[i] > 0.0 { centred / self.std[i] * self.target.std } else { centred };
                out.set(i, t, scaled + self.target.mean);
            }
        }
        Ok(out)
    }
}

fn is_dropped(x: &Tensor, t: usize) -> bool {
    (0..x.rows()).all(|i| x.get(i, t) == 0.0)
}

/// Per-dimension affine normalization fitted on a training partition.
///
/// Dropped (all-zero) frames are ignored when fitting and stay zero when
/// applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub stats: [ModalityStats; 3],
}

impl Normalizer {
    pub fn fit(train: &[SequenceRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("normalizer fit"));
        }
        let fit_one = |m: Modality| -> Result<ModalityStats> {
            let dims = train[0].features[m.index()].rows();
            let mut sum = vec![0.0; dims];
            let mut count = 0usize;
            for rec in train {
                let x = &rec.features[m.index()];
                if x.rows() != dims {
                    return Err(Error::shape("normalizer fit", x.shape(), (dims, x.cols())));
                }
                for t in (0..x.cols()).filter(|&t| !is_dropped(x, t)) {
                    count += 1;
                    for (i, s) in sum.iter_mut().enumerate() {
                        *s += x.get(i, t);
                    }
                }
            }
            if count == 0 {
                return Err(Error::InsufficientData { needed: 1, got: 0 });
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
            let mut sq = vec![0.0; dims];
            for rec in train {
                let x = &rec.features[m.index()];
                for t in (0..x.cols()).filter(|&t| !is_dropped(x, t)) {
                    for (i, s) in sq.iter_mut().enumerate() {
                        let c = x.get(i, t) - mean[i];
                        *s += c * c;
                    }
                }
            }
            let std: Vec<f64> = sq
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let sd = (s / count as f64).sqrt();
                    if sd > 1e-12 {
                        sd
                    } else {
                        log::warn!("{m:?} dimension {i} has zero variance; centring only");
                        0.0
                    }
                })
                .collect();
            Ok(ModalityStats { mean, std, target: NormTarget::for_modality(m) })
        };
        Ok(Self { stats: [fit_one(Modality::Audio)?, fit_one(Modality::Visual)?, fit_one(Modality::Text)?] })
    }

    pub fn apply_features(&self, m: Modality, x: &Tensor) -> Result<Tensor> {
        self.stats[m.index()].apply(x)
    }

    pub fn apply(&self, rec: &SequenceRecord) -> Result<SequenceRecord> {
        let mut out = rec.clone();
        for m in Modality::ALL {
            out.features[m.index()] = self.apply_features(m, &rec.features[m.index()])?;
        }
        Ok(out)
    }

    pub fn apply_all(&self, recs: &[SequenceRecord]) -> Result<Vec<SequenceRecord>> {
        recs.iter().map(|r| self.apply(r)).collect()
    }
}
