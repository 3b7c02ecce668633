use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A multi-index set or multinomial exceeded a configured size limit.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// A configuration value failed validation. `path` is a JSON-style path.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Input data are malformed (non-finite entries, mismatched lengths, ...).
    #[error("data error: {0}")]
    Data(String),

    /// The operation needs a closed form the target kind does not provide.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed (singular system after retries, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Sizing(_) | Error::Unsupported(_) => 2,
            Error::Data(_) | Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
