use posefuse_core::image::ImageError;
use posefuse_core::metrics::MetricsError;
use posefuse_core::pose::PoseError;
use posefuse_core::pq::PqError;
use posefuse_core::toy::ToyError;
use posefuse_core::{AlignError, LossError};
use thiserror::Error;

/// Every failure a command can report, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{failed} of {total} jobs failed")]
    PartialFailure { failed: usize, total: usize },
    #[error("training diverged: {0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Param(_) => 3,
            CliError::Io(_) => 4,
            CliError::PartialFailure { .. } => 5,
            CliError::Divergence(_) => 6,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<PoseError> for CliError {
    fn from(e: PoseError) -> Self {
        match e {
            PoseError::Io(_) => CliError::Io(e.to_string()),
            PoseError::DegeneratePose => CliError::Param(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<PqError> for CliError {
    fn from(e: PqError) -> Self {
        match e {
            PqError::Io(_) => CliError::Io(e.to_string()),
            PqError::BadMagic | PqError::UnsupportedVersion(_) | PqError::CorruptPayload(_) => CliError::Parse(e.to_string()),
            PqError::Pose { ref source, .. } if !matches!(source, PoseError::DegeneratePose) => CliError::Parse(e.to_string()),
            _ => CliError::Param(e.to_string()),
        }
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        CliError::Param(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::Io(_) => CliError::Io(e.to_string()),
            ImageError::Decode(_) => CliError::Parse(e.to_string()),
            _ => CliError::Param(e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Image(inner) => inner.into(),
            other => CliError::Param(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Param(e.to_string())
    }
}

impl From<ToyError> for CliError {
    fn from(e: ToyError) -> Self {
        match e {
            ToyError::DivergenceDetected { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Param(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}
