use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate grid: encoding nodes {0} and {1} coincide")]
    DegenerateGrid(usize, usize),

    #[error("underdetermined fit: {points} points for {needed} coefficients")]
    Underdetermined { points: usize, needed: usize },

    #[error("insufficient workers: N = {n} but k + t = {needed}")]
    InsufficientWorkers { n: usize, needed: usize },

    #[error("insufficient data: codeword of length {len} but K = {needed}")]
    InsufficientData { len: usize, needed: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("locator radius exceeded: A = {a} but at most {radius} errors can be located algebraically")]
    RadiusExceeded { a: usize, radius: usize },

    #[error("{what}: {count} combinations exceed the cap of {cap}")]
    TooLarge { what: String, count: u128, cap: u128 },

    #[error("unrecoverable: {0}")]
    Unrecoverable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::InvalidArgument(_)
            | Error::Parse(_)
            | Error::SizeMismatch { .. }
            | Error::InsufficientWorkers { .. } => 2,
            Error::TooLarge { .. } => 3,
            Error::DegenerateGrid(..)
            | Error::Underdetermined { .. }
            | Error::InsufficientData { .. }
            | Error::RadiusExceeded { .. }
            | Error::Unrecoverable(_)
            | Error::Unsupported(_)
            | Error::Numerical(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
