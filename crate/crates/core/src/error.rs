use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MorphError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{format} format error at {location}: {message}")]
    Format {
        format: &'static str,
        location: String,
        message: String,
    },

    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("query against an empty set")]
    EmptySet,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("landmark scheme mismatch: {left} vs {right}")]
    SchemeMismatch { left: String, right: String },

    #[error("every correspondence was rejected in ICP iteration {iteration}")]
    NoCorrespondence { iteration: usize },

    #[error("no vertex projects into the image")]
    EmptyProjection,

    #[error("crop at radius {radius} left no usable surface")]
    EmptyCrop { radius: f64 },

    #[error("linear solver failed for part {part}: {message}")]
    Solver { part: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("missing view: {0}")]
    MissingView(&'static str),
}

impl MorphError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MorphError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, location: impl ToString, message: impl ToString) -> Self {
        MorphError::Format {
            format,
            location: location.to_string(),
            message: message.to_string(),
        }
    }
}
