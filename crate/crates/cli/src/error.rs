use thiserror::Error;

/// CLI failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or arguments (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data, model or image (exit 3).
    #[error("{0}")]
    Data(String),
    /// A degenerate estimate stopped the fit (exit 4).
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<efmix::Error> for CliError {
    fn from(err: efmix::Error) -> Self {
        use efmix::Error as E;
        match err {
            E::InvalidArgument(msg) => CliError::Usage(msg),
            E::Unsupported(_) => CliError::Usage(err.to_string()),
            E::Domain { .. } | E::Support { .. } | E::Dimension { .. } => CliError::Data(err.to_string()),
            E::Degenerate { .. }
            | E::NotEnoughDistinct { .. }
            | E::InactiveCenter(_)
            | E::NoActiveCenters
            | E::NoConvergence(_) => CliError::Degenerate(err.to_string()),
        }
    }
}
