use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("activation cache mismatch: {0}")]
    Cache(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("observation at t={t} precedes previous t={prev}")]
    TimeRegression { t: f64, prev: f64 },
    #[error("duplicate detach timestamp {0}")]
    DuplicateTimestamp(f64),
    #[error("routing error: {0}")]
    Routing(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
