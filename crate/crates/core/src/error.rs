use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid step size {0}: must be finite and > 0")]
    InvalidStep(f64),

    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("integer {0} is outside the codable range [1, 2^62)")]
    OutOfRange(u64),

    #[error("magnitude {0} exceeds the 62-bit code limit")]
    MagnitudeOverflow(f64),

    #[error("bit stream truncated at bit {at}")]
    Truncated { at: usize },

    #[error("gamma prefix longer than {limit} zero bits at bit {at}")]
    PrefixTooLong { at: usize, limit: usize },

    #[error("corrupt stream at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },

    #[error("dithered quantization requires a dither seed")]
    MissingDitherSeed,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("budget {budget} bits/element is below the coarsest achievable rate {coarsest}")]
    InfeasibleBudget { budget: f64, coarsest: f64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(&'static str),
}

impl Error {
    pub(crate) fn corrupt(offset: usize, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            offset,
            reason: reason.into(),
        }
    }
}
