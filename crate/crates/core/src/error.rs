use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("partition order {n} exceeds the configured maximum {max}")]
    OrderTooLarge { n: usize, max: usize },

    #[error("malformed partition: {0}")]
    MalformedPartition(String),

    #[error("coefficient of order {needed} requested but only {available} available")]
    InsufficientOrder { needed: usize, available: usize },

    #[error("series orders differ ({left} vs {right})")]
    OrderMismatch { left: usize, right: usize },

    #[error("series are not invertible under boxed convolution: first coefficient is {first}")]
    NotInvertible { first: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series order {got} is too small, need at least {needed}")]
    OrderTooSmall { needed: usize, got: usize },

    #[error("polynomial has non-real root {re} + {im}i")]
    NonRealRoots { re: f64, im: f64 },

    #[error("recovery failed: minimal residual {residual:e} exceeds threshold {threshold:e}")]
    RecoveryFailed { residual: f64, threshold: f64 },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("density is undefined for sigma = 0; use atomic moments instead")]
    SigmaZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not self-adjoint (deviation {deviation:e})")]
    NonSelfAdjoint { deviation: f64 },

    #[error("eigensolver failed in trial {trial}")]
    Eigensolver { trial: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OrderTooLarge { .. } => "order_too_large",
            Error::MalformedPartition(_) => "malformed_partition",
            Error::InsufficientOrder { .. } => "insufficient_order",
            Error::OrderMismatch { .. } => "order_mismatch",
            Error::NotInvertible { .. } => "not_invertible",
            Error::Domain(_) => "domain",
            Error::OrderTooSmall { .. } => "order_too_small",
            Error::NonRealRoots { .. } => "nonreal_roots",
            Error::RecoveryFailed { .. } => "recovery_failed",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SigmaZero => "sigma_zero",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonSelfAdjoint { .. } => "non_selfadjoint",
            Error::Eigensolver { .. } => "eigensolver_failure",
            Error::Parse(_) => "parse",
        }
    }

    /// Name of the module the error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::OrderTooLarge { .. } | Error::MalformedPartition(_) => "ncpart",
            Error::InsufficientOrder { .. }
            | Error::OrderMismatch { .. }
            | Error::NotInvertible { .. }
            | Error::Parse(_) => "series",
            Error::Domain(_)
            | Error::OrderTooSmall { .. }
            | Error::NonRealRoots { .. }
            | Error::RecoveryFailed { .. } => "models",
            Error::NoConvergence { .. } | Error::SigmaZero => "subordination",
            Error::DimensionMismatch(_) | Error::NonSelfAdjoint { .. } | Error::Eigensolver { .. } => {
                "randmat"
            }
        }
    }
}
