use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({}x{}) vs ({}x{})", .left.0, .left.1, .right.0, .right.1)]
    Shape { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: need at least {needed} valid frames, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr {lr:e})")]
    Diverged { epoch: usize, batch: usize, lr: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }
}
