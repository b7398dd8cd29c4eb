use sympbrake_core::Error;

/// Failures that end a command, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical refinement needed: {0}")]
    Refinement(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) | Self::Io(_) => 1,
            Self::Refinement(_) => 2,
        }
    }
}

/// Errors a command can recover from numerically map to exit 2, the rest are
/// problems with the input.
pub fn is_refinement(e: &Error) -> bool {
    matches!(
        e,
        Error::RefinementNeeded { .. } | Error::Instability { .. } | Error::StepSize { .. } | Error::JointMismatch { .. } | Error::Horizon { .. }
    )
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_refinement(&e) {
            Self::Refinement(e.to_string())
        } else {
            Self::Input(e.to_string())
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_REFINEMENT: u8 = 2;
pub const EXIT_IDENTITY: u8 = 3;
