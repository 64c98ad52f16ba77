use crate::lp::LpError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program unexpectedly reported {0:?}")]
    SolverStatus(crate::lp::LpStatus),
    #[error("training labels contain a single class")]
    SingleClassData,
    #[error("non-finite value in feature column {column}, row {row}")]
    NonfiniteFeature { row: usize, column: usize },
    #[error("labels must be +1 or -1, found {0}")]
    InvalidLabel(f64),
    #[error("every initial coefficient is zero; garrote scaling cannot select any effect")]
    EmptyInitial,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("column {0} is constant; cannot place spline knots")]
    ConstantColumn(usize),
    #[error("cross-validation fold {fold} has a training split missing a class")]
    ClassAbsentFromFold { fold: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
