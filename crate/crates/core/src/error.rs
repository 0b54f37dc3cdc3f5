use std::path::PathBuf;

use thiserror::Error;

use crate::teacher::TeacherError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("empty rationale")]
    EmptyRationale,

    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sequence of {len} tokens exceeds context length {context}{}", sample_suffix(.sample))]
    ContextOverflow {
        len: usize,
        context: usize,
        sample: Option<String>,
    },

    #[error("non-finite loss on example `{example_id}`")]
    NonFinite { example_id: String },

    #[error("training diverged after {} epochs: {source}", .record.epochs.len())]
    Diverged {
        record: Box<crate::train::RunRecord>,
        #[source]
        source: Box<Error>,
    },

    #[error("scorer failed at stage {stage} of sample `{sample_id}`: {source}")]
    Scorer {
        sample_id: String,
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("mode/regime mismatch: {0}")]
    ModeMismatch(String),

    #[error("output `{0}` exists (pass --force to overwrite)")]
    Exists(PathBuf),

    #[error("provenance check failed for `{path}`: {message}")]
    Provenance { path: PathBuf, message: String },

    #[error(transparent)]
    Teacher(#[from] TeacherError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn sample_suffix(sample: &Option<String>) -> String {
    match sample {
        Some(id) => format!(" (sample `{id}`)"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
