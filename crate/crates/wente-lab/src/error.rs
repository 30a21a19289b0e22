//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction or call parameters.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A field descriptor evaluated to a non-finite value at a grid node.
    #[error("evaluation error: `{expr}` is singular at node (r={r:.6e}, theta={theta:.6e})")]
    Evaluation { expr: String, r: f64, theta: f64 },

    /// Two fields live on different grids.
    #[error("grid mismatch: operands sampled on different grids")]
    GridMismatch,

    /// The radial mode solve hit a numerically singular pivot.
    #[error("solver error: {0}")]
    Solver(String),

    /// A ratio was requested with a vanishing denominator.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unknown descriptor `{0}`")]
    UnknownDescriptor(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
