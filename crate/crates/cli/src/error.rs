use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, settings or inputs.
    #[error("usage: {0}")]
    Usage(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<wf_intertwine::Error> for CliError {
    fn from(e: wf_intertwine::Error) -> Self {
        use wf_intertwine::Error as E;
        match e {
            E::InvalidArgument(_) | E::NotInDomain(_) => CliError::Usage(e.to_string()),
            E::NumericFailure(_) | E::Cancellation { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(std::io::Error::other(e.to_string()))
        } else {
            CliError::Usage(format!("malformed csv: {e}"))
        }
    }
}
