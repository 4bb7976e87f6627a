use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// State-space guard: operations that materialize all 2^n configurations
    /// refuse to run past their documented limit.
    #[error("capacity exceeded: n = {requested} spins, limit for this operation is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("eigensolver did not converge: best residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
