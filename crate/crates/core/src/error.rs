use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {degree} exceeds basis maximum {max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("random input {0} lies outside [-1, 1]")]
    OutsideSupport(f64),

    #[error("quadrature rule has {have} nodes, need at least {need}")]
    InsufficientQuadrature { have: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite state at step {step}: particle {particle}, {field} mode {mode}")]
    NonFiniteState {
        step: usize,
        particle: usize,
        field: &'static str,
        mode: usize,
    },

    #[error("reference solver produced a non-finite value at step {step}")]
    SolverBlowUp { step: usize },

    #[error("density became strongly negative ({value:e}) at v = {v}")]
    NegativeDensity { value: f64, v: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState { .. }
                | Error::SolverBlowUp { .. }
                | Error::NegativeDensity { .. }
                | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
