//! Crate-wide error type.
//!
//! Errors split into three categories that callers (in particular the CLI)
//! treat differently:
//!
//! * [`Error::Input`] — malformed or inconsistent input: bad dimensions,
//!   unparseable polynomials, empty regions, unsatisfiable sampler bounds.
//! * [`Error::Hypothesis`] — structurally valid input that violates a
//!   mathematical hypothesis of the requested computation (e.g. an exponent
//!   formula evaluated where a denominator vanishes).
//! * [`Error::DegreeCap`] — an exact polynomial product exceeded the degree
//!   cap; guards against accidental blow-up in symbolic paths.

use thiserror::Error;

/// Total-degree cap applied by the checked polynomial products unless a
/// caller raises it explicitly.
pub const DEFAULT_DEGREE_CAP: u32 = 40;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input (dimension mismatch, parse failure, empty range, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Input violates a mathematical hypothesis of the operation.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// A symbolic product exceeded the configured total-degree cap.
    #[error("degree cap exceeded: total degree {degree} > cap {cap}")]
    DegreeCap { degree: u32, cap: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for [`Error::Input`].
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Convenience constructor for [`Error::Hypothesis`].
    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }
}
