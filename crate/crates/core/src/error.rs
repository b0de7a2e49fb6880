use thiserror::Error;

/// Which interiority condition failed when a barrier was evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `t - f(X, Y) <= 0` for an epigraph block.
    Epigraph,
    /// First matrix (or vector) argument is not positive definite.
    FirstArgument,
    /// Second matrix (or vector) argument is not positive definite.
    SecondArgument,
    /// Orthant coordinate not strictly positive.
    Orthant { index: usize },
    /// PSD block matrix not positive definite.
    Psd,
    /// Block `index` of a model failed with the inner violation.
    Block { index: usize, inner: Box<Violation> },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Epigraph => write!(f, "epigraph slack is not positive"),
            Violation::FirstArgument => write!(f, "first argument is not positive definite"),
            Violation::SecondArgument => write!(f, "second argument is not positive definite"),
            Violation::Orthant { index } => write!(f, "orthant coordinate {index} is not positive"),
            Violation::Psd => write!(f, "matrix is not positive definite"),
            Violation::Block { index, inner } => write!(f, "block {index}: {inner}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("eigendecomposition did not converge")]
    EigFailure,
    #[error("argument {value:e} outside the domain of {function}")]
    DomainViolation { function: &'static str, value: f64 },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("point is not interior: {0}")]
    NotInterior(Violation),
    #[error("factorization of a Hessian block failed: {0}")]
    SingularBlock(String),
    #[error("iterative solve did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("linear system is inconsistent (residual {residual:e})")]
    Inconsistent { residual: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("face has no interior (rank 0)")]
    NoInteriorFace,
    #[error("no initial-point heuristic applies")]
    NoHeuristic,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
