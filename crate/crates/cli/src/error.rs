use thiserror::Error;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_COMPUTE: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] freespace::Error),

    #[error("{0}")]
    Usage(String),

    /// The fit ran but did not produce a usable result; the report was written.
    #[error("{0}")]
    FitFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use freespace::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::FitFailed(_) => EXIT_COMPUTE,
            CliError::Core(e) => match e {
                E::Config(_) => EXIT_CONFIG,
                E::Io(_) | E::Csv(_) | E::Json(_) | E::Parse { .. } => EXIT_IO,
                E::Domain(_) | E::ModelInconsistency { .. } | E::Fit(_) => EXIT_COMPUTE,
            },
        }
    }
}

impl From<freespace::fitting::FitError> for CliError {
    fn from(e: freespace::fitting::FitError) -> Self {
        CliError::Core(e.into())
    }
}
