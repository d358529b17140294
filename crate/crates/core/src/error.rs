use thiserror::Error;

/// Errors raised by the channel and link models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates the invariant of the type that owns it.
    /// `field` is the configuration key of the offending value.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Evaluation requested at a non-positive time.
    #[error("time must be strictly positive, got {0} s")]
    NonPositiveTime(f64),

    /// Evaluation requested outside the channel height.
    #[error("position z = {z} m lies outside the channel [0, {height}] m")]
    OutOfChannel { z: f64, height: f64 },

    /// The eigenfunction series has not converged with the configured number
    /// of terms at the requested time.
    #[error(
        "series not converged at t = {time} s: tail bound {tail_bound:.3e} exceeds tolerance \
         {tolerance:.3e} with {n_terms} terms"
    )]
    TruncationNotConverged {
        time: f64,
        n_terms: usize,
        tail_bound: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Fails with [`Error::InvalidParameter`] unless `value` is finite and `> 0`.
pub(crate) fn ensure_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

/// Fails with [`Error::InvalidParameter`] unless `value` is finite and `>= 0`.
pub(crate) fn ensure_nonnegative(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}
