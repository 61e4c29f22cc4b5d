use std::fmt;

use sac_core::error::SacError;

/// Failures of a subcommand, each tied to a stable exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input (exit 2).
    Input(String),
    /// Solver failures and contract violations, mapped by kind.
    Core(SacError),
    /// A statistical or validation gate failed (exit 5).
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Gate(_) => 5,
            CliError::Core(e) => core_code(e),
        }
    }
}

fn core_code(e: &SacError) -> i32 {
    match e {
        SacError::Config(_) | SacError::Domain(_) | SacError::Range(_) | SacError::Format(_) | SacError::Io(_) => 2,
        SacError::Stability(_) => 3,
        SacError::Blowup { .. } | SacError::DegenerateFlow { .. } => 4,
        SacError::SampleFailed { source, .. } => core_code(source),
        SacError::Contract(_) => 1,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Gate(m) => write!(f, "gate failed: {m}"),
        }
    }
}

impl From<SacError> for CliError {
    fn from(e: SacError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Wraps an I/O failure on `path`.
pub fn io_at(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
