use std::process::ExitCode;

use heredity_svm::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, arguments or config files.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unusable input data.
    #[error("{0}")]
    Data(String),
    /// A fit could not be completed.
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Lp(_) | CoreError::SolverStatus(_) | CoreError::EmptyInitial => CliError::Solver(msg),
            CoreError::InvalidArgument(_) => CliError::Usage(msg),
            CoreError::SingleClassData
            | CoreError::NonfiniteFeature { .. }
            | CoreError::InvalidLabel(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::ConstantColumn(_)
            | CoreError::ClassAbsentFromFold { .. } => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
