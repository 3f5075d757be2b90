use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid projective point: coordinate vector is zero")]
    InvalidPoint,

    #[error("tangent vector is not orthogonal to its base point (defect {defect:.3e})")]
    InconsistentTangent { defect: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("group element is singular (|det| = {det:.3e})")]
    SingularGroupElement { det: f64 },

    #[error("direction must be a traceless Hermitian matrix (trace {trace:.3e})")]
    NotTraceless { trace: f64 },

    #[error("degenerate parametrization: {0}")]
    DegenerateParametrization(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no balanced model found (best residual {residual:.3e})")]
    NoBalancedModel { residual: f64 },

    #[error("auxiliary point set is not stable: {0}")]
    UnstableAuxiliary(String),

    #[error("no general-position subset found after {budget} draws")]
    DegenerateSource { budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
