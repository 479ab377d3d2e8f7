//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document (JSON syntax, missing fields, bad literals).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally invalid data: bad weights, unknown vertices, disconnected
    /// graph, zero cut parameters and the like.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An operation was called outside its domain (non-tree graph handed to
    /// the secular solver, p out of range, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A numerical procedure did not produce a usable result (no convergence,
    /// singular reduced system, residual too large).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
