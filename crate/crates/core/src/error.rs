use thiserror::Error;

/// Errors raised by the sampling, fitting and leverage routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("refinement did not terminate within {iterations} iterations; l1 trace {trace:?}")]
    NonTermination { iterations: usize, trace: Vec<f64> },

    #[error("reweighting did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize, weights: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
