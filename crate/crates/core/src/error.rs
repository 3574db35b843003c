use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error in `{quantity}`: {detail}")]
    Evaluation { quantity: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("context {context} has no supporting samples")]
    ContextEmpty { context: usize },

    #[error("cluster {cluster} of context {context} has zero total weight")]
    DegenerateCluster { context: usize, cluster: usize },

    #[error("landmark assembly: {0}")]
    Assembly(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("relative improvement undefined: baseline objective is zero")]
    UndefinedRelative,

    #[error("missing artifact {}: run `{subcommand}` first", path.display())]
    MissingArtifact { path: PathBuf, subcommand: &'static str },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the user's configuration rather than by a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
