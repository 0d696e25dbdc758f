use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Arguments have incompatible shapes or violate an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A parameter lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The constraint vectors are (numerically) linearly dependent.
    #[error("degenerate construction: {0}")]
    Degenerate(String),

    /// The photon-number truncation leaves too much probability mass behind.
    #[error("truncation error: tail mass {tail_mass:e} exceeds {limit:e} at m_max = {m_max}; increase m_max")]
    Truncation { m_max: usize, tail_mass: f64, limit: f64 },

    /// The simplex solver stopped without reaching optimality.
    #[error("LP failure after {iterations} iterations: {reason} (objective {objective:e})")]
    Lp {
        iterations: usize,
        objective: f64,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
