use thiserror::Error;

/// Errors raised by the matrix, polynomial, picture and evolution layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HipError {
    #[error("matrix is singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    HermitianityViolated { deviation: f64 },

    #[error("observable is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("determinant polynomial is not a nonzero constant")]
    NonConstantDeterminant,

    #[error("integration exceeded the step limit of {max_steps}")]
    StepLimitExceeded { max_steps: usize },

    #[error("no trajectory sample at t = {t}")]
    MissingSample { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, HipError>;
