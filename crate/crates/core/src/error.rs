use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image is {width}x{height} but the kernel needs at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("max order mismatch: spectrum has L={spectrum}, template has L={template}")]
    OrderMismatch { spectrum: usize, template: usize },

    #[error("zero denominator in test statistic (sigma_min^2 = 0 and no angular variance)")]
    ZeroVariance,

    #[error("variance estimate {value:e} is negative beyond rounding")]
    NegativeVariance { value: f64 },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("ROC needs both true and false trials (got {positives} true, {negatives} false)")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported depth in {path}: {reason}")]
    UnsupportedDepth { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
