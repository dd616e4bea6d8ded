use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole of the local zeta function at {0}")]
    Pole(String),
    #[error("integral does not converge: {0}")]
    NonConvergence(String),
    #[error("p-adic refinement depth {needed} exceeds ceiling {ceiling}")]
    DepthOverflow { needed: u32, ceiling: u32 },
    #[error("quadrature did not reach tolerance (value {value:e}, error estimate {error:e})")]
    Quadrature { value: f64, error: f64 },
    #[error("extrapolation unstable: successive estimates differ by {0:e}")]
    Unstable(f64),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
