use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimizerState};
use super::scheduler::{SchedulerConfig, SchedulerState};
use crate::data::{build_masks, SequenceRecord, Window};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Target};
use crate::model::Model;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs that each ramp the rate from `lr_min` to `lr_init`.
    pub warmup_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub target: Target,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-5,
            lr_min: 1e-8,
            weight_decay: 1e-3,
            batch_size: 12,
            max_epochs: 100,
            warmup_epochs: 5,
            plateau_patience: 5,
            plateau_factor: 0.1,
            early_stop_patience: 15,
            target: Target::Valence,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_init && self.lr_init.is_finite()) {
            return Err(Error::Config(format!("need 0 < lr_min <= lr_init, got {} / {}", self.lr_min, self.lr_init)));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!("plateau factor must be in (0, 1), got {}", self.plateau_factor)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config("batch size, epochs and patience values must be positive".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn scheduler(&self) -> SchedulerConfig {
        SchedulerConfig {
            lr_init: self.lr_init,
            lr_min: self.lr_min,
            warmup_epochs: self.warmup_epochs,
            patience: self.plateau_patience,
            factor: self.plateau_factor,
        }
    }
}

/// One line of `history.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ccc: f64,
    /// Rate used by the epoch's last batch.
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// The best state seen on the validation partition.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_val_ccc: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl FitOutcome {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_ccc,lr\n");
        for r in &self.history {
            out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_ccc, r.lr));
        }
        out
    }
}

struct Sample<'a> {
    window: &'a Window,
    mask: Vec<bool>,
}

fn mean_gradients(parts: Vec<(f64, Vec<Tensor>)>) -> (f64, Vec<Tensor>) {
    let n = parts.len() as f64;
    let mut iter = parts.into_iter();
    let (mut loss, mut acc) = iter.next().expect("non-empty batch");
    for (l, grads) in iter {
        loss += l;
        for (a, g) in acc.iter_mut().zip(&grads) {
            a.add_assign(g);
        }
    }
    for a in &mut acc {
        a.scale_in_place(1.0 / n);
    }
    (loss / n, acc)
}

/// Trains `model` on windows of the training partition, scoring the
/// validation partition after every epoch.
///
/// At the end of each epoch the best parameters seen so far are restored,
/// so the returned model always scores `best_val_ccc`. Windows are processed
/// in parallel within a batch, but gradients are summed in batch order and
/// the result is deterministic for a fixed seed.
pub fn fit(mut model: Model, train: &[Window], val: &[SequenceRecord], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if val.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let samples: Vec<Sample> = train
        .iter()
        .map(|w| Sample { window: w, mask: build_masks(w).labels(cfg.target).to_vec() })
        .filter(|s| s.mask.iter().filter(|&&v| v).count() >= 2)
        .collect();
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f54_ff1e);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut optimizer = OptimizerState::new(cfg.adam, model.store().values());
    let mut scheduler = SchedulerState::new(cfg.scheduler());
    let n_batches = samples.len().div_ceil(cfg.batch_size);

    let mut history = Vec::new();
    let mut best_store = model.store().clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = scheduler.lr;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            lr = scheduler.batch_lr(epoch, b, n_batches);
            let parts: Vec<(f64, Vec<Tensor>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &samples[i];
                    model.loss_and_grads(s.window.feature_refs(), s.window.labels(cfg.target), &s.mask)
                })
                .collect::<Result<_>>()?;
            let (loss, grads) = mean_gradients(parts);
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged { epoch, batch: b, lr });
            }
            adam_step(model.store_mut().values_mut(), &grads, &mut optimizer, lr, cfg.weight_decay)?;
            loss_sum += loss;
        }
        let train_loss = loss_sum / n_batches as f64;
        let val_ccc = evaluate(&model, val, cfg.target)?.ccc;
        if !val_ccc.is_finite() {
            return Err(Error::Diverged { epoch, batch: n_batches, lr });
        }
        if val_ccc > best_val {
            best_val = val_ccc;
            best_epoch = epoch;
            best_store = model.store().clone();
        } else {
            *model.store_mut() = best_store.clone();
        }
        scheduler.end_epoch(epoch, val_ccc);
        log::info!("epoch {epoch:>3}  loss {train_loss:.4}  val ccc {val_ccc:.4}  lr {lr:.2e}");
        history.push(EpochRecord { epoch, train_loss, val_ccc, lr });
        if epoch - best_epoch >= cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }
    Ok(FitOutcome { model, history, best_val_ccc: best_val, best_epoch, stopped_early })
}
