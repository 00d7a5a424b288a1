use thiserror::Error;

/// Errors raised by the stability analysis and the kinetic solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("log-magnitude {log_magnitude:.3e} of D_{order} is outside the representable range")]
    Overflow { order: usize, log_magnitude: f64 },

    #[error("quadrature did not converge: {nodes} vs {doubled} nodes differ by {difference:.3e}")]
    QuadratureDivergence { nodes: usize, doubled: usize, difference: f64 },

    #[error("interaction kernel does not fit in a domain of length {0} (need l > 2)")]
    DomainTooSmall(f64),

    #[error("lambda = {lambda} lies within {distance:.1e} of the pole at {pole}")]
    Pole { lambda: num_complex::Complex64, pole: num_complex::Complex64, distance: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("bracket [{lo}, {hi}] does not change stability")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("B1 cross-check mismatch {mismatch:.3e} exceeds tolerance (basis scaling error)")]
    BasisScaling { mismatch: f64 },

    #[error("{count} eigenvalue(s) of N within {tolerance:.1e} of the imaginary axis")]
    OnAxisEigenvalue { count: usize, tolerance: f64 },

    #[error("stable Schur block has dimension {found}, expected {expected}")]
    StableDimension { found: usize, expected: usize },

    #[error("matrix {what} is near singular (condition number {condition:.3e})")]
    NearSingular { what: &'static str, condition: f64 },

    #[error("CFL violation: explicit rate x dt = {0:.3} exceeds 1")]
    Cfl(f64),

    #[error("solution blew up at t = {time:.3} (norm growth {growth:.3e})")]
    BlowUp { time: f64, growth: f64 },

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("no travelling wave: mode-1 amplitude {0:.3e} is below threshold")]
    NoWave(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
