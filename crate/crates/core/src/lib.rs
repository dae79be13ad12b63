//! Recursive joint cross-modal attention (RJCMA) for three frame-aligned
//! feature streams, together with everything needed to train and verify it
//! at desk scale: a reverse-mode autodiff tape, causal TCN encoders, the
//! concordance correlation coefficient, synthetic data and a training loop.

// Index loops read closer to the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod temporal;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
