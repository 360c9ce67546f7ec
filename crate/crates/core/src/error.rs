use thiserror::Error;

/// Errors raised by the modelling, synthesis and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("grid does not resolve the mode waist: {bins_per_waist:.2} radial bins per waist, need at least {required}")]
    Resolution { bins_per_waist: f64, required: usize },

    #[error("angle {value} rad outside the grid range [{min}, {max}] rad")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("hyperbolic argument {argument} exceeds the overflow guard {limit}")]
    Range { argument: f64, limit: f64 },

    #[error("spectrum kind mismatch: expected {expected}, found {found}")]
    SpectrumKind { expected: &'static str, found: &'static str },

    #[error("mode (l={l}, p={p}) has positive weight but is missing from the basis")]
    MissingMode { l: i32, p: u32 },

    #[error("slice does not fit the frame: {0}")]
    SliceOutside(String),

    #[error("insufficient data: {have} samples, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("curve has no peak above its baseline")]
    UndefinedWidth,

    #[error("covariance curve is not even: imaginary Fourier norm is {ratio:.3e} of the real norm")]
    Asymmetry { ratio: f64 },

    #[error("matrix is not symmetric: max |A - Aᵀ| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { deviation: f64, tolerance: f64 },

    #[error("mode count undefined: all weights are zero")]
    UndefinedCount,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
