use thiserror::Error;

use crate::physics::Species;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{species} occupancy {value} outside the admissible range {range}")]
    Domain {
        species: Species,
        value: f64,
        range: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{0} is only defined for the {1} model variant")]
    VariantMisuse(&'static str, &'static str),

    /// Initial densities must have bounded chemical potentials.
    #[error("inadmissible initial data: {species} density {value} in cell {cell} (need {bounds})")]
    InitialData {
        species: Species,
        cell: usize,
        value: f64,
        bounds: String,
    },

    #[error("field length {got} does not match mesh with {expected} cells")]
    FieldLength { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("newton failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("time step failed at t = {time}: {reason}")]
    StepFailure { time: f64, reason: String },

    #[error("free energy increased by {increase:.3e} at t = {time} (tolerance {tolerance:.1e})")]
    EnergyIncrease {
        time: f64,
        increase: f64,
        tolerance: f64,
    },

    #[error("regularization violates mu <= M - max(|z| C1 + |xi|): mu = {mu}, bound = {bound}")]
    Regularization { mu: f64, bound: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
