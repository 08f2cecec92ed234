use thiserror::Error;

/// Failure of a CLI run, carrying its exit code class.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or parameters. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// A dimension or size guard fired before allocation. Exit code 3.
    #[error("{0}")]
    Resource(String),
    /// Numerical failure or I/O error. Exit code 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<supermult::Error> for CliError {
    fn from(e: supermult::Error) -> Self {
        use supermult::Error as E;
        match e {
            E::Resource(_) => CliError::Resource(e.to_string()),
            E::InvalidDimension(_)
            | E::Shape(_)
            | E::UnsupportedExponent(_)
            | E::InvalidChannel(_)
            | E::Domain(_)
            | E::Unsupported(_) => CliError::Config(e.to_string()),
            E::NotHermitian(_)
            | E::NotPsd(_)
            | E::InvalidTrace(_)
            | E::NotNormalized(_)
            | E::NonFinite => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
