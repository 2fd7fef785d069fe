use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the laboratory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {what} at grid index {index}")]
    NonFinite { what: &'static str, index: usize },

    /// The potential left the space of Kähler potentials: the metric's
    /// smallest eigenvalue dropped to or below the admissibility threshold.
    #[error("metric not admissible: min eigenvalue {min_eig:.6e} at grid index {index}")]
    NonAdmissible { min_eig: f64, index: usize },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("step failure at t = {t}: dt fell below dt_min = {dt_min:.3e} ({reason})")]
    StepFailure { t: f64, dt_min: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive energy {value:.3e} at record {index}")]
    NonPositiveEnergy { index: usize, value: f64 },

    #[error("quadratic form is not positive definite (p·Ap = {curvature:.3e})")]
    IndefiniteForm { curvature: f64 },

    #[error("coefficient field lost uniform ellipticity at node {node} (min eigenvalue {min_eig:.3e})")]
    EllipticityLost { node: usize, min_eig: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("snapshot format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
