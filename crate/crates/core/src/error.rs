use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gimbal lock: elevation {elevation} rad is within 1e-6 of +/-pi/2")]
    GimbalLock { elevation: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not a rotation: {0}")]
    NotOrthonormal(String),

    #[error("contrastive denominator underflow for query {query}: every weighted negative vanishes")]
    DegenerateDenominator { query: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at step {step}: angle={angle} contrastive={contrastive}")]
    NonFiniteLoss { step: u64, angle: f64, contrastive: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("class id {class_id} out of range (num_classes = {num_classes})")]
    BadClassId { class_id: usize, num_classes: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("dataset too small: {available} training samples for batch size {batch_size}")]
    DatasetTooSmall { available: usize, batch_size: usize },

    #[error("class {class_id} has {available} training samples, {requested} shots requested")]
    NotEnoughShots { class_id: usize, available: usize, requested: usize },

    #[error("split `{0}` is empty")]
    EmptySplit(String),

    #[error("unknown sweep parameter `{0}` (expected tau, kappa, lambda or weight_mode)")]
    UnknownParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the error stems from user input (bad file, bad flag, bad data)
    /// rather than a failure inside the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. } | Error::DegenerateDenominator { .. }
        )
    }
}
