use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A query box or strip reaches outside the sampled region; the caller
    /// must enlarge the field.
    #[error("query {what} escapes field coverage {coverage}")]
    OutOfCoverage { what: String, coverage: String },

    /// The strip ran out of points before the requested chain length.
    #[error("field exhausted: reached {achieved} of {requested} required")]
    FieldExhausted { achieved: u64, requested: u64 },

    /// A minimizing label fell inside the left guard band of the window.
    #[error(
        "window too small: label {label} is minimized at {argmin} (guard ends at {guard_end}); \
         suggested i_min <= {suggested_i_min}"
    )]
    WindowTooSmall {
        label: i64,
        argmin: i64,
        guard_end: i64,
        suggested_i_min: i64,
    },

    #[error("mesh too coarse: {0}")]
    RefinementRequired(String),

    #[error("empty sample")]
    EmptySample,
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
