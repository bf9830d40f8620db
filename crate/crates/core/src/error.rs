use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: missing required column `{0}`")]
    Schema(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("forecast error: {0}")]
    Forecast(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("geojson: {0}")]
    GeoJson(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
