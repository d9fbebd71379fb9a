use thiserror::Error;

/// Failure classes, each mapped to a stable process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, unwritable output.
    #[error("{0}")]
    Usage(String),
    /// Integration blowup or a quadrature that missed its tolerance.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<flockcert::Error> for CliError {
    fn from(e: flockcert::Error) -> Self {
        use flockcert::Error as E;
        match e {
            E::Blowup { .. } | E::Tolerance { .. } | E::NonFinite { .. } | E::Degenerate(_) => {
                Self::Numeric(e.to_string())
            }
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(format!("i/o error: {e}"))
    }
}
