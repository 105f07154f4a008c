use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    /// The analytic policy gradient produced a NaN or infinity.
    #[error("non-finite gradient in component `{component}`")]
    NonFiniteGradient { component: String },

    /// A training step failed; carries the step index.
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A trace file does not have the expected column layout.
    #[error("schema mismatch in column `{column}`: {message}")]
    Schema { column: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
