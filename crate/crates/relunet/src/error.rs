//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by network construction, evaluation and encoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A dimension did not match; `layer` is 1-based, 0 refers to the input.
    #[error("dimension mismatch at layer {layer}: {detail}")]
    Dimension { layer: usize, detail: String },

    /// A parameter violated a documented precondition.
    #[error("{0}")]
    InvalidArgument(String),

    /// A network failed structural validation.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// A weight cannot be represented by the coding scheme.
    #[error("weight {value} is not representable with {bits} bits at step 2^-{frac_bits}")]
    Unrepresentable { value: f64, bits: u32, frac_bits: u32 },

    /// The encoder's size budget was exceeded.
    #[error("{0}")]
    Budget(String),

    /// A bit stream could not be decoded.
    #[error("decode error at bit {offset}: {detail}")]
    Decode { offset: usize, detail: String },

    /// A target description could not be used.
    #[error("target error: {0}")]
    Target(String),

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Checks the accuracy hypothesis shared by all constructors.
pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(invalid("eps must be in (0, 0.5)"))
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p must be positive"))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
