use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("invalid mass estimate {0}")]
    InvalidMass(f64),
    #[error("coordinate {value} at point {index} lies outside [0, 1]")]
    OutOfDomain { index: usize, value: f64 },
    #[error("weight {value} at index {index} is not strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "solver did not converge at eps={eps}: residual {residual:e} after {iterations} iterations"
    )]
    NonConvergence {
        eps: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("oracle potentials violate dual feasibility by {violation:e}")]
    InfeasibleOracle { violation: f64 },
    #[error("positive part of the density integrates to {integral:e}")]
    DegenerateDensity { integral: f64 },
    #[error("total masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },
    #[error("rate fit needs at least two distinct sample sizes with positive risk")]
    DegenerateFit,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
}
