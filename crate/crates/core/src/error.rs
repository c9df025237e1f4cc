//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh construction: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index}: signed area {area}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("unsupported quadrature degree {0} (supported range 1..=10)")]
    QuadratureDegree(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("study level h={h} failed: {source}")]
    Level {
        h: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Tag an error with the time-step index it occurred at.
    pub fn at_step(self, step: usize) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// Tag an error with the study level it occurred at.
    pub fn at_level(self, h: f64) -> Error {
        Error::Level {
            h,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a linear-solver failure.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Solver(_) => true,
            Error::Step { source, .. } | Error::Level { source, .. } => {
                source.is_solver_failure()
            }
            _ => false,
        }
    }
}
