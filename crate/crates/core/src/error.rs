use thiserror::Error;

use crate::solver::StepReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no Slater point: {0}")]
    NoSlaterPoint(String),

    #[error("cone interior is empty")]
    EmptyInterior,

    #[error("inconsistent certificate: objective at Slater point {objective} is below the dual lower value {lower}")]
    InconsistentCertificate { objective: f64, lower: f64 },

    #[error("step sizes violate the convergence condition: {0}")]
    StepSize(StepReport),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
