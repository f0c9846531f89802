use thiserror::Error;

/// Errors raised by the computational modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("height y = {y} outside [0, 1]")]
    Domain { y: f64 },

    #[error("density {rho} outside the background range [{min}, {max}]")]
    DensityRange { rho: f64, min: f64, max: f64 },

    #[error("invalid profile: {invariant} violated at y = {y} (value {value})")]
    Profile {
        invariant: &'static str,
        y: f64,
        value: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("eigensolver failure: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate nonlinearity: |I3|/I1 = {ratio:e} below threshold {threshold:e}")]
    DegenerateNonlinearity { ratio: f64, threshold: f64 },

    #[error("genericity integral {value:e} below threshold {threshold:e}")]
    Genericity { value: f64, threshold: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("amplitude too large: density {rho} <= 0 at node ({i}, {j})")]
    AmplitudeTooLarge { rho: f64, i: usize, j: usize },

    #[error("truncation: half-width {half_width} below decay length {required}")]
    Truncation { half_width: f64, required: f64 },

    #[error("speed step {delta_c} must be positive and below eps^2 = {eps_sq}")]
    Step { delta_c: f64, eps_sq: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-uniform spacing in c at index {index}")]
    NonUniform { index: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
