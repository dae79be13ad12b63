//! Training recipe: Adam with decoupled weight decay, per-epoch warm-up
//! followed by reduce-on-plateau, best-state reload, early stopping, and a
//! k-fold driver.

mod adam;
mod cv;
mod fit;
mod scheduler;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use cv::{ablate_recursions, cross_validate, CvJob};
pub use fit::{fit, EpochRecord, FitOutcome, TrainConfig};
pub use scheduler::{Phase, SchedulerConfig, SchedulerState};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{window, Normalizer, SequenceRecord, Window, WindowSpec};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult, Target};
use crate::model::{Model, ModelConfig};

/// Everything produced by one training run on a train/val partition.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub checkpoint: Checkpoint,
    pub outcome: FitOutcome,
    pub eval: EvalResult,
}

pub fn windows_for(records: &[SequenceRecord], spec: &WindowSpec) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for r in records {
        out.extend(window(r, spec)?);
    }
    Ok(out)
}

/// Fits normalization on `train`, windows it, trains a freshly initialized
/// model and evaluates the best state on `val`.
pub fn train_on_split(
    train: &[SequenceRecord],
    val: &[SequenceRecord],
    model_cfg: &ModelConfig,
    spec: &WindowSpec,
    cfg: &TrainConfig,
) -> Result<TrainedRun> {
    if spec.length != model_cfg.fusion.window {
        return Err(Error::Config(format!(
            "window length {} differs from model window {}",
            spec.length, model_cfg.fusion.window
        )));
    }
    let normalizer = Normalizer::fit(train)?;
    let train_n = normalizer.apply_all(train)?;
    let val_n = normalizer.apply_all(val)?;
    let windows = windows_for(&train_n, spec)?;
    let model = Model::init(model_cfg.clone(), cfg.seed)?;
    let outcome = fit(model, &windows, &val_n, cfg)?;
    let eval = EvalResult::from_targets(&[evaluate(&outcome.model, &val_n, cfg.target)?]);
    let checkpoint = Checkpoint { model: outcome.model.clone(), target: cfg.target, normalizer };
    Ok(TrainedRun { checkpoint, outcome, eval })
}

/// One row of a valence/arousal/mean results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    pub mean: Option<f64>,
}

impl TableRow {
    pub fn new(label: impl Into<String>, valence: Option<f64>, arousal: Option<f64>) -> Self {
        let present: Vec<f64> = [valence, arousal].into_iter().flatten().collect();
        let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Self { label: label.into(), valence, arousal, mean }
    }

    pub fn get(&self, target: Target) -> Option<f64> {
        match target {
            Target::Valence => self.valence,
            Target::Arousal => self.arousal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub key: String,
    pub rows: Vec<TableRow>,
}

impl ResultTable {
    /// Markdown table with columns `key | Valence | Arousal | Mean`.
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let cells: Vec<[String; 4]> =
            self.rows.iter().map(|r| [r.label.clone(), fmt(r.valence), fmt(r.arousal), fmt(r.mean)]).collect();
        let header = [self.key.as_str(), "Valence", "Arousal", "Mean"];
        // Numeric columns are at least as wide as "0.000".
        let width: Vec<usize> = (0..4)
            .map(|c| {
                cells.iter().map(|row| row[c].len()).chain([header[c].len(), if c > 0 { 5 } else { 0 }]).max().unwrap()
            })
            .collect();
        let line = |row: [&str; 4]| {
            let parts: Vec<String> = row.iter().zip(&width).map(|(s, &w)| format!(" {s:<w$} ")).collect();
            format!("|{}|\n", parts.join("|"))
        };
        let mut out = format!("{}\n\n", self.title);
        out.push_str(&line(header));
        let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w + 2)).collect();
        out.push_str(&format!("|{}|\n", rule.join("|")));
        for row in &cells {
            out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
        }
        out
    }
}
