use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has zero norm and cannot be projected onto the sphere")]
    ZeroVector(usize),

    #[error("cloud resultant vanishes; mean direction is undefined")]
    DegenerateMean,

    #[error("resultant length is zero; breadth is undefined")]
    DegenerateBreadth,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error(
        "pair {index} has group sizes ({n}, {m}) but the batch uses ({expected_n}, {expected_m})"
    )]
    MixedShapes {
        index: usize,
        n: usize,
        m: usize,
        expected_n: usize,
        expected_m: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad header: {0}")]
    BadHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("engines disagree: naive counted {naive} exceedances, batched counted {engine}")]
    EquivalenceFailure { naive: usize, engine: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by this crate.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::EquivalenceFailure { .. })
    }
}
