use levelset_core::Error;

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Protocol(_) | Error::UnsupportedPrevalence(_) => {
                CliError::Protocol(e.to_string())
            }
            Error::InteriorRequired
            | Error::BadGrid(_)
            | Error::BadPair(..)
            | Error::InvalidParameter(_)
            | Error::NegativeWeight { .. }
            | Error::BadSum { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn data_io(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}
