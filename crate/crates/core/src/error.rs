use thiserror::Error;

/// Failures raised by chart construction, jet evaluation and the geometry pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regularity error at u = {u:?}: {reason}")]
    Regularity { u: Vec<f64>, reason: String },
    #[error("signature error: candidate normal has non-positive square {0:e}")]
    Signature(f64),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
