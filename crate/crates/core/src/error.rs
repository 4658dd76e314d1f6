use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: unknown node reference `{reference}` on line {line}")]
    UnknownReference {
        path: String,
        line: usize,
        reference: String,
    },

    #[error("{path}: bad matrix container: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("no embedding found for {} node(s): {}", .0.len(), .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("non-finite loss at epoch {epoch} (layer weight norms: {layer_norms:?})")]
    NonFiniteLoss { epoch: usize, layer_norms: Vec<f64> },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input files.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::UnknownReference { .. } | Error::Format { .. } | Error::Json { .. }
        )
    }
}
