//! Concordance correlation coefficient, the CCC loss, and partition-level
//! evaluation.
//!
//! `ρ_c = 2σ_xy / (σ_x² + σ_y² + (μ_x − μ_y)² + ε)` with population moments and
//! `ε = 1e-12`. Element-wise identical series score exactly 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{series_covariance, series_mean, Graph, Var};
use crate::data::SequenceRecord;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CCC_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Valence,
    Arousal,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Valence, Target::Arousal];

    pub fn name(self) -> &'static str {
        match self {
            Target::Valence => "valence",
            Target::Arousal => "arousal",
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Target::Valence),
            "arousal" => Ok(Target::Arousal),
            other => Err(Error::Config(format!("unknown target `{other}` (expected valence or arousal)"))),
        }
    }
}

fn valid_indices(len: usize, mask: Option<&[bool]>) -> Result<Vec<usize>> {
    match mask {
        Some(m) if m.len() != len => Err(Error::shape("mask", (1, m.len()), (1, len))),
        Some(m) => Ok((0..len).filter(|&i| m[i]).collect()),
        None => Ok((0..len).collect()),
    }
}

/// CCC between predictions and ground truth over the unmasked elements.
pub fn ccc(pred: &[f64], gt: &[f64], mask: Option<&[bool]>) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::shape("ccc", (1, pred.len()), (1, gt.len())));
    }
    let idx = valid_indices(pred.len(), mask)?;
    if idx.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: idx.len() });
    }
    let x: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| gt[i]).collect();
    if x == y {
        return Ok(1.0);
    }
    Ok(ccc_formula(&x, &y))
}

fn ccc_formula(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (series_mean(x), series_mean(y));
    let (vx, vy) = (series_covariance(x, x), series_covariance(y, y));
    let cxy = series_covariance(x, y);
    let diff = mx - my;
    cxy * 2.0 / (vx + vy + diff * diff + CCC_EPSILON)
}

/// `1 − ρ_c` on the tape. `pred` is a `1 x K` row; masked frames are dropped
/// before any statistic is formed, so they receive exactly zero gradient.
pub fn ccc_loss(g: &mut Graph, pred: Var, labels: &[f64], mask: &[bool]) -> Result<Var> {
    let (rows, cols) = g.shape(pred);
    if rows != 1 || labels.len() != cols {
        return Err(Error::shape("ccc_loss", (rows, cols), (1, labels.len())));
    }
    let idx = valid_indices(cols, Some(mask))?;
    if idx.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: idx.len() });
    }
    let p = g.select_cols(pred, &idx)?;
    let y = g.constant(Tensor::from_raw(1, idx.len(), idx.iter().map(|&i| labels[i]).collect()));
    let mx = g.mean(p)?;
    let my = g.mean(y)?;
    let vx = g.variance(p)?;
    let vy = g.variance(y)?;
    let cxy = g.covariance(p, y)?;
    let num = g.scale(cxy, 2.0);
    let diff = g.sub(mx, my)?;
    let diff2 = g.mul(diff, diff)?;
    let spread = g.add(vx, vy)?;
    let den = g.add(spread, diff2)?;
    let den = g.add_scalar(den, CCC_EPSILON);
    let rho = g.div(num, den)?;
    let neg = g.scale(rho, -1.0);
    Ok(g.add_scalar(neg, 1.0))
}

/// Produces one prediction per frame of a sequence.
pub trait Predictor {
    fn predict_sequence(&self, record: &SequenceRecord) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub id: String,
    pub target: Target,
    /// `None` when the sequence has fewer than two annotated frames.
    pub ccc: Option<f64>,
    pub n_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEval {
    pub target: Target,
    pub ccc: f64,
    pub n_frames: usize,
    pub per_sequence: Vec<SequenceScore>,
}

/// Global CCC over the concatenation of every annotated frame in the
/// partition, plus per-sequence scores.
pub fn evaluate<P: Predictor + Sync>(
    predictor: &P,
    sequences: &[SequenceRecord],
    target: Target,
) -> Result<TargetEval> {
    if sequences.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let predictions: Vec<Vec<f64>> =
        sequences.par_iter().map(|s| predictor.predict_sequence(s)).collect::<Result<_>>()?;
    let mut all_pred = Vec::new();
    let mut all_gt = Vec::new();
    let mut per_sequence = Vec::with_capacity(sequences.len());
    for (seq, pred) in sequences.iter().zip(&predictions) {
        let labels = seq.labels(target);
        if pred.len() != labels.len() {
            return Err(Error::shape("evaluate", (1, pred.len()), (1, labels.len())));
        }
        let mask = crate::data::label_mask(labels);
        let n_frames = mask.iter().filter(|&&v| v).count();
        let score = if n_frames >= 2 { Some(ccc(pred, labels, Some(&mask))?) } else { None };
        per_sequence.push(SequenceScore { id: seq.id.clone(), target, ccc: score, n_frames });
        for ((&p, &y), &valid) in pred.iter().zip(labels).zip(&mask) {
            if valid {
                all_pred.push(p);
                all_gt.push(y);
            }
        }
    }
    let global = ccc(&all_pred, &all_gt, None)?;
    Ok(TargetEval { target, ccc: global, n_frames: all_pred.len(), per_sequence })
}

/// Machine-readable evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccc_valence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccc_arousal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    pub n_frames: usize,
    pub per_sequence: Vec<SequenceScore>,
}

impl EvalResult {
    pub fn from_targets(evals: &[TargetEval]) -> Self {
        let pick = |t: Target| evals.iter().find(|e| e.target == t).map(|e| e.ccc);
        let (ccc_valence, ccc_arousal) = (pick(Target::Valence), pick(Target::Arousal));
        let present: Vec<f64> = [ccc_valence, ccc_arousal].into_iter().flatten().collect();
        let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Self {
            ccc_valence,
            ccc_arousal,
            mean,
            n_frames: evals.iter().map(|e| e.n_frames).max().unwrap_or(0),
            per_sequence: evals.iter().flat_map(|e| e.per_sequence.iter().cloned()).collect(),
        }
    }

    pub fn get(&self, target: Target) -> Option<f64> {
        match target {
            Target::Valence => self.ccc_valence,
            Target::Arousal => self.ccc_arousal,
        }
    }

    /// Plain-text summary.
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut out = format!(
            "CCC  valence {}  arousal {}  mean {}  ({} frames)\n",
            fmt(self.ccc_valence),
            fmt(self.ccc_arousal),
            fmt(self.mean),
            self.n_frames
        );
        for s in &self.per_sequence {
            out.push_str(&format!("  {:<16} {:<8} {:>8}  ({} frames)\n", s.id, s.target, fmt(s.ccc), s.n_frames));
        }
        out
    }
}
