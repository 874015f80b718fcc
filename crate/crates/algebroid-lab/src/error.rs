use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong sizes, mismatched objects, out-of-range indices.
    #[error("input error: {0}")]
    Input(String),
    /// A mathematical precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Configuration file or schema problems.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
