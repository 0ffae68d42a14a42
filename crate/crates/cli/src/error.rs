use bonded_mining::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    /// Bad input data, or an output that could not be written.
    #[error("{0}")]
    Data(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    /// Process exit status: 1 config, 2 data, 3 invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::UnsupportedHashRate(_) => CliError::Config(e.to_string()),
            CoreError::Invariant(_) => CliError::Invariant(e.to_string()),
            CoreError::Domain(_) | CoreError::InsufficientData { .. } | CoreError::ProtocolViolation(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv: {e}"))
    }
}
