use qre_core::Error;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Core(#[from] Error),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    /// 2 for anything wrong with the input, 1 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::BadParams(_) => 2,
            CliError::Core(e) => match e {
                Error::Parse(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::NonSymmetric { .. }
                | Error::NotHermitian { .. }
                | Error::NonFinite
                | Error::InvariantViolation(_)
                | Error::Unsupported(_) => 2,
                _ => 1,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "IoError",
            CliError::BadParams(_) => "BadParams",
            CliError::Core(e) => match e {
                Error::Parse(_) => "ParseError",
                Error::InvalidParameter(_) => "InvalidParameter",
                Error::DimensionMismatch { .. } => "DimensionMismatch",
                Error::NonSymmetric { .. } => "NonSymmetric",
                Error::NotHermitian { .. } => "NotHermitian",
                Error::NonFinite => "NonFinite",
                Error::InvariantViolation(_) => "InvariantViolation",
                Error::Unsupported(_) => "Unsupported",
                Error::EigFailure => "EigFailure",
                Error::DomainViolation { .. } => "DomainViolation",
                Error::NotInterior(_) => "NotInterior",
                Error::SingularBlock(_) => "SingularBlock",
                Error::NoConvergence { .. } => "NoConvergence",
                Error::Inconsistent { .. } => "Inconsistent",
                Error::NoInteriorFace => "NoInteriorFace",
                Error::NoHeuristic => "NoHeuristic",
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error serializes")
    }
}

pub(crate) fn parse_err(e: serde_json::Error) -> CliError {
    CliError::Core(Error::Parse(e.to_string()))
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
