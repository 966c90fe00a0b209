use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The Euler scheme produced a non-finite state.
    #[error("simulation diverged at step {step} (t = {t}): {reason}")]
    Simulation { step: usize, t: f64, reason: String },

    /// A CSV file did not match the declared column layout.
    #[error("schema error in column `{column}`: {reason}")]
    Schema { column: String, reason: String },

    /// Every problem found while parsing a configuration file.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// A Monte Carlo replication failed.
    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
