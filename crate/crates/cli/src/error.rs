use std::fmt;
use std::path::{Path, PathBuf};

use msgpm::imgcore::{FlowIoError, ImageError, MetricsError};
use msgpm::pipeline::PipelineError;

/// Failure of a CLI command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit status 1.
    Usage(String),
    /// Unreadable or unwritable files; exit status 2.
    Io(String),
    /// A computation failed; exit status 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::Channels(_) | ImageError::DimensionMismatch { .. } => {
                CliError::Numeric(format!("imgcore: {e}"))
            }
            _ => CliError::Io(format!("imgcore: {e}")),
        }
    }
}

impl From<FlowIoError> for CliError {
    fn from(e: FlowIoError) -> Self {
        CliError::Io(format!("imgcore: {e}"))
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Numeric(format!("imgcore: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::UnknownPreprocessor(_) => CliError::Usage(e.to_string()),
            PipelineError::Densify(msgpm::densify::DensifyError::UnknownInterpolator(..))
            | PipelineError::Densify(msgpm::densify::DensifyError::MissingInput(_)) => {
                CliError::Usage(e.to_string())
            }
            PipelineError::Densify(msgpm::densify::DensifyError::Flow(_)) => CliError::Io(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

pub(crate) fn create_dir(path: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
