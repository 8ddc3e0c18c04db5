use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectrum outside the closed cone of order {k}: S_1..S_k = {margins:?}")]
    Cone { k: usize, margins: Vec<f64> },

    #[error("critical-point constraint is infeasible: rank {rank} of {expected} with residual {residual:e}")]
    Construction {
        rank: usize,
        expected: usize,
        residual: f64,
    },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("subsolution is not k-subharmonic at |z|^2 = {location}: margins {margins:?}")]
    Assembly { location: f64, margins: Vec<f64> },

    #[error("Newton iteration did not converge in {iterations} steps (last residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("line search stagnated at Newton step {iteration}: no step keeps every node inside the cone (residual {residual:e})")]
    Stagnation { iteration: usize, residual: f64 },

    #[error("stencil error at node {node:?}: {reason}")]
    Stencil { node: Vec<usize>, reason: String },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("malformed export: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        value,
        reason: reason.into(),
    }
}
