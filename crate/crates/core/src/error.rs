use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("filter parse error at byte {pos}: {msg}")]
    FilterParse { pos: usize, msg: String },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("bitmap length mismatch: {left} vs {right}")]
    BitmapLength { left: usize, right: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty subindex: {0}")]
    EmptySubindex(String),

    #[error("corrupt snapshot: {0}")]
    Snapshot(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
