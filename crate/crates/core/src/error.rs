use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or schema-violating input. `locus` names the file, line or
    /// record the problem was found at.
    #[error("{locus}: {message}")]
    Format { locus: String, message: String },

    #[error("invalid grammar: {0}")]
    Grammar(String),

    #[error("unknown scene type `{0}`")]
    UnknownSceneType(String),

    #[error("missing table `{0}`")]
    MissingTable(String),

    #[error("cannot fit {what}: {reason}")]
    Fit { what: String, reason: String },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("planner {which} point ({x:.3}, {y:.3}) is blocked")]
    Blocked { which: &'static str, x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contrastive divergence diverged at epoch {epoch} (|lambda| = {magnitude:.3e})")]
    Diverged {
        epoch: usize,
        magnitude: f64,
        trace: Vec<crate::learning::CdEpoch>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            locus: locus.into(),
            message: message.into(),
        }
    }

    pub(crate) fn fit(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Fit {
            what: what.into(),
            reason: reason.into(),
        }
    }
}
