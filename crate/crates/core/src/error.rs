use crate::vectors::BinaryIndicator;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A box with no positive-length edge was handed to the brancher.
    #[error("cannot branch a degenerate (point) box")]
    DegenerateBox,

    /// Enumeration or search exceeded its configured budget.
    #[error("resource exhausted: {0}")]
    ResourceExhausted(String),

    /// The branch-reduce-and-bound loop hit `max_iter` before certifying
    /// ε-accuracy. The best point found so far is carried along.
    #[error(
        "DMO iteration limit {iterations} reached (incumbent value {value}, upper bound {upper_bound})"
    )]
    IterationLimit {
        iterations: usize,
        incumbent: BinaryIndicator,
        value: f64,
        upper_bound: f64,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
