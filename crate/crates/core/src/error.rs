use thiserror::Error;

/// Errors raised by the analysis, simulation and synthesis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("condition not reached within {horizon} days: {condition}")]
    NotReached { condition: String, horizon: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no goldilocks intervention: {0}")]
    NoGoldilocks(String),

    #[error("no feasible point found: {0}")]
    NoFeasiblePoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
