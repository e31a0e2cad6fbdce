use thiserror::Error;

/// Errors produced by the staged tree toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown level {value:?} for variable {variable:?}")]
    UnknownLevel { variable: String, value: String },

    #[error("malformed data: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    /// A KL-type divergence received a vector with a zero entry.
    #[error("{0} requires strictly positive probability vectors; smooth the estimates first")]
    NonPositive(&'static str),

    #[error(
        "conditional distribution undefined: situation {situation} at depth {depth} has no observations and alpha = 0"
    )]
    UndefinedConditional { depth: usize, situation: usize },

    #[error("log-likelihood is -inf: zero probability at depth {depth} for an observed transition")]
    ZeroProbability { depth: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from numerical evaluation rather than from bad
    /// input. Front ends use this to choose an exit status.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::UndefinedConditional { .. } | Error::ZeroProbability { .. } | Error::Numeric(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
