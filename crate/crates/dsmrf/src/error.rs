use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance is singular: {0}")]
    SingularCovariance(String),

    #[error("solver failure: {reason} (last residual {residual:.3e} at lambda {lambda:.3e})")]
    SolverFailure {
        reason: String,
        residual: f64,
        lambda: f64,
    },

    #[error("numeric error: {reason}")]
    Numeric {
        reason: String,
        condition: Option<f64>,
    },

    #[error("invalid state: {0}")]
    State(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
