use std::io::ErrorKind;
use std::path::PathBuf;

use morphkit::MorphError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: MorphError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Stage { .. } => 1,
            CliError::MissingInput(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

/// Attaches a stage name; a file that is not there is a missing input.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for morphkit::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| match source {
            MorphError::Io { path, source } if source.kind() == ErrorKind::NotFound => CliError::MissingInput(path),
            source => CliError::Stage { stage, source },
        })
    }
}
