use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("column `{0}` not present in header")]
    MissingColumn(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("environment does not expose its mean outcome function")]
    UnknownMean,

    #[error("operation requires a discrete environment")]
    NotDiscrete,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn at_rep(self, rep: usize) -> Self {
        Error::Replication {
            rep,
            source: Box::new(self),
        }
    }

    pub fn at_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
