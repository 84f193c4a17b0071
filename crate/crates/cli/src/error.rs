use skelgest::ingest::IngestError;
use skelgest::nn::NnError;
use skelgest::pipeline::PipelineError;
use skelgest::preprocess::PreprocessError;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config values, missing mandatory options.
    #[error("{0}")]
    Usage(String),
    /// Input data or artifacts that cannot be read or do not fit together.
    #[error("{0}")]
    Data(String),
    /// A check or training run that completed and failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidSynthConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::InvalidSavgol { .. } | PreprocessError::InvalidWindow { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Diverged(_) => CliError::Check(e.to_string()),
            NnError::InvalidSpec(_) | NnError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Nn(inner) => inner.into(),
            PipelineError::Preprocess(inner) => inner.into(),
            PipelineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<skelgest::skeleton::SkeletonError> for CliError {
    fn from(e: skelgest::skeleton::SkeletonError) -> Self {
        CliError::Usage(e.to_string())
    }
}
