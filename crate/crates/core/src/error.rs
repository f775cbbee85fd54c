use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{a} is not invertible modulo {m} (gcd = {gcd})")]
    NotCoprime { a: u64, m: u64, gcd: u64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("no integer lies in the window [{a0}·{q}, {a1}·{q}]")]
    EmptyWindow { q: u64, a0: f64, a1: f64 },

    #[error("invalid window ({a0}, {a1}): {reason}")]
    InvalidWindow {
        a0: f64,
        a1: f64,
        reason: &'static str,
    },

    #[error("invalid shift set: {0}")]
    InvalidShifts(String),

    #[error("threshold 2^{m1} is not below q = {q}")]
    ThresholdTooLarge { m1: u32, q: u64 },

    #[error("cap {cap} exceeds the supported maximum {max}")]
    CapTooLarge { cap: u64, max: u64 },

    #[error("empirical CDF needs at least one sample")]
    EmptySample,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: field `{field}`: {message}")]
    ConfigParse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("cost guard: {0}")]
    Overflow(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors raised by numeric or cost guards rather than bad input.
    pub fn is_numeric_guard(&self) -> bool {
        matches!(
            self,
            Error::Overflow(_) | Error::CapTooLarge { .. } | Error::ThresholdTooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
