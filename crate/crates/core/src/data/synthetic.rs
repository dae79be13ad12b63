//! Seeded synthetic stand-in for a frame-annotated multimodal corpus.
//!
//! Each sequence follows a 2-D shared latent `z_t = tanh(u_t)`, where `u_t` is
//! a clipped Gaussian random walk. Valence and arousal are bounded functions
//! of `z_t`. Every modality observes `M_m · [z_t; q_{m,t}] + noise`, where
//! `q_m` is a private nuisance walk and `M_m` a fixed random mixing matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SequenceRecord, LABEL_MISSING};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const WALK_CLIP: f64 = 2.5;
const SHARED_DIM: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMap {
    /// `valence = z_0`, `arousal = z_1`.
    Linear,
    /// Smooth nonlinear mix of both latent components.
    #[default]
    Smooth,
}

impl LabelMap {
    fn apply(self, z: [f64; 2]) -> [f64; 2] {
        match self {
            LabelMap::Linear => z,
            LabelMap::Smooth => [(1.5 * z[0] + 0.5 * z[0] * z[1]).tanh(), (1.5 * z[1] - 0.5 * z[0] * z[0]).tanh()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_sequences: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub d_t: usize,
    /// Dimension of each modality's private nuisance latent.
    pub private_dim: usize,
    /// Standard deviation of the random-walk increments.
    pub walk_step: f64,
    /// Observation noise per modality (audio, visual, text).
    pub noise_std: [f64; 3],
    /// Probability that a modality frame is zeroed.
    pub dropout_prob: [f64; 3],
    /// Probability that a frame's labels are replaced by `-5`.
    pub missing_label_prob: f64,
    pub label_map: LabelMap,
    pub fps: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_sequences: 12,
            min_frames: 192,
            max_frames: 320,
            d_a: 16,
            d_v: 16,
            d_t: 16,
            private_dim: 2,
            walk_step: 0.08,
            noise_std: [0.2, 0.2, 0.3],
            dropout_prob: [0.02, 0.05, 0.02],
            missing_label_prob: 0.02,
            label_map: LabelMap::Smooth,
            fps: 30.0,
        }
    }
}

impl SyntheticConfig {
    /// Nearly noise-free, linearly labelled data that a small model can fit.
    pub fn low_noise() -> Self {
        Self {
            noise_std: [0.02; 3],
            dropout_prob: [0.01; 3],
            missing_label_prob: 0.01,
            label_map: LabelMap::Linear,
            ..Self::default()
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.d_a, self.d_v, self.d_t]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sequences == 0 || self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::Config("need n_sequences >= 1 and 1 <= min_frames <= max_frames".into()));
        }
        if self.dims().contains(&0) {
            return Err(Error::Config("modality dims must be positive".into()));
        }
        let probs = self.dropout_prob.iter().chain(std::iter::once(&self.missing_label_prob));
        if probs.into_iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if self.noise_std.iter().chain([&self.walk_step]).any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("noise and walk step must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `u_t = clip(u_{t-1} + step · N(0, 1))`, returned as `tanh(u_t)`, one row
/// per component.
fn latent_walk(rng: &mut impl Rng, dims: usize, frames: usize, step: f64) -> Vec<Vec<f64>> {
    (0..dims)
        .map(|_| {
            let mut u = 0.5 * normal(rng);
            (0..frames)
                .map(|_| {
                    u = (u + step * normal(rng)).clamp(-WALK_CLIP, WALK_CLIP);
                    u.tanh()
                })
                .collect()
        })
        .collect()
}

/// Generates `cfg.n_sequences` records. Identical `(cfg, seed)` pairs give
/// bit-identical output.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<SequenceRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = SHARED_DIM + cfg.private_dim;
    let mix_scale = 1.0 / (sources as f64).sqrt();
    let mixing: Vec<Tensor> =
        cfg.dims().iter().map(|&d| Tensor::from_fn(d, sources, |_, _| normal(&mut rng) * mix_scale)).collect();

    let mut records = Vec::with_capacity(cfg.n_sequences);
    for s in 0..cfg.n_sequences {
        let frames = rng.random_range(cfg.min_frames..=cfg.max_frames);
        let shared = latent_walk(&mut rng, SHARED_DIM, frames, cfg.walk_step);
        let mut features: Vec<Tensor> = Vec::with_capacity(3);
        for m in 0..3 {
            let private = latent_walk(&mut rng, cfg.private_dim, frames, cfg.walk_step);
            let source = |j: usize, t: usize| if j < SHARED_DIM { shared[j][t] } else { private[j - SHARED_DIM][t] };
            let mix = &mixing[m];
            let mut x = Tensor::zeros(mix.rows(), frames);
            for t in 0..frames {
                let dropped = rng.random::<f64>() < cfg.dropout_prob[m];
                for i in 0..mix.rows() {
                    let clean: f64 = (0..sources).map(|j| mix.get(i, j) * source(j, t)).sum();
                    let value = clean + cfg.noise_std[m] * normal(&mut rng);
                    x.set(i, t, if dropped { 0.0 } else { value });
                }
            }
            features.push(x);
        }
        let mut valence = Vec::with_capacity(frames);
        let mut arousal = Vec::with_capacity(frames);
        for t in 0..frames {
            let [v, a] = cfg.label_map.apply([shared[0][t], shared[1][t]]);
            let missing = rng.random::<f64>() < cfg.missing_label_prob;
            valence.push(if missing { LABEL_MISSING } else { v });
            arousal.push(if missing { LABEL_MISSING } else { a });
        }
        let [a, v, t]: [Tensor; 3] = features.try_into().expect("three modalities");
        records.push(SequenceRecord { id: format!("seq{s:03}"), features: [a, v, t], valence, arousal, fps: cfg.fps });
    }
    Ok(records)
}
