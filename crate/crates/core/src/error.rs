use thiserror::Error;

/// Errors raised while building or querying the search components.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario index {index} out of range (cardinality {cardinality})")]
    IndexOutOfRange { index: usize, cardinality: usize },
    #[error("value {value} of parameter `{param}` is not on its grid")]
    OffGrid { param: String, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("all operator weights of the requested kind are zero")]
    NoSelectableOperator,
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
