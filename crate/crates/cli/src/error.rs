use serde::Serialize;

/// Failure of a run, with its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lifschitz::Error),
    #[error("{0}")]
    Contract(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Machine-readable form written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    /// 2 configuration, 3 numerical or module failure, 4 contract violation.
    pub fn exit_code(&self) -> i32 {
        use lifschitz::Error as E;
        match self {
            CliError::Config(_) | CliError::Csv(_) => 2,
            CliError::Core(E::InvalidParameter(_) | E::DimensionMismatch(_) | E::EmptyDomain | E::Unsupported(_)) => 2,
            CliError::Contract(_) => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            4 => "contract",
            _ => "numerical",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}
