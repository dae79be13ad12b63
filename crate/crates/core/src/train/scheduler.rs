use serde::Serialize;

/// Learning-rate phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Plateau,
}

/// Settings shared by the warm-up ramp and the plateau reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchedulerConfig {
    pub lr_init: f64,
    pub lr_min: f64,
    pub warmup_epochs: usize,
    pub patience: usize,
    pub factor: f64,
}

/// Warm-up followed by reduce-on-plateau.
///
/// During each of the first `warmup_epochs` epochs the rate ramps linearly
/// from `lr_min` to `lr_init` across that epoch's batches. Afterwards the
/// rate holds until the validation CCC fails to improve on its best value
/// for `patience` consecutive epochs, then drops by `factor`, never below
/// `lr_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerState {
    pub config: SchedulerConfig,
    pub phase: Phase,
    pub best: f64,
    pub epochs_since_improvement: usize,
    pub lr: f64,
}

impl SchedulerState {
    pub fn new(config: SchedulerConfig) -> Self {
        let phase = if config.warmup_epochs > 0 { Phase::Warmup } else { Phase::Plateau };
        let lr = if config.warmup_epochs > 0 { config.lr_min } else { config.lr_init };
        Self { config, phase, best: f64::NEG_INFINITY, epochs_since_improvement: 0, lr }
    }

    /// Rate for batch `batch` of `n_batches` in `epoch`.
    pub fn batch_lr(&mut self, epoch: usize, batch: usize, n_batches: usize) -> f64 {
        if epoch < self.config.warmup_epochs {
            let frac = (batch + 1) as f64 / n_batches.max(1) as f64;
            self.lr = self.config.lr_min + (self.config.lr_init - self.config.lr_min) * frac.min(1.0);
        }
        self.lr
    }

    /// Records the epoch's validation CCC and returns the rate for the next
    /// epoch.
    pub fn end_epoch(&mut self, epoch: usize, val_ccc: f64) -> f64 {
        let improved = val_ccc > self.best;
        if improved {
            self.best = val_ccc;
        }
        if epoch + 1 < self.config.warmup_epochs {
            return self.lr;
        }
        if self.phase == Phase::Warmup {
            self.phase = Phase::Plateau;
            self.lr = self.config.lr_init;
            self.epochs_since_improvement = 0;
            return self.lr;
        }
        if improved {
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= self.config.patience {
                let next = self.lr * self.config.factor;
                // Repeated multiplication drifts by an ulp or two; snap onto the floor.
                self.lr = if next <= self.config.lr_min * (1.0 + 1e-9) { self.config.lr_min } else { next };
                self.epochs_since_improvement = 0;
            }
        }
        self.lr
    }
}
