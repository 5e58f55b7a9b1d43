use thiserror::Error;

/// Failure modes shared by every stage of the simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("truncation deficit {deficit:.3e} exceeds budget {budget:.3e} ({context})")]
    Truncation {
        deficit: f64,
        budget: f64,
        context: String,
    },

    /// The beam-splitter coherent-state law did not hold on the probe pair.
    #[error("beam splitter convention check failed: residual {0:.3e}")]
    Convention(f64),

    #[error("numerical accuracy not reached: {0}")]
    Accuracy(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
