//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, model assembly, training, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A node id referenced by an edge is outside `[0, num_nodes)`.
    #[error("edge ({src}, {dst}) references node outside [0, {num_nodes})")]
    NodeOutOfRange {
        src: usize,
        dst: usize,
        num_nodes: usize,
    },

    /// Operations on a graph with zero nodes.
    #[error("graph has no nodes")]
    EmptyGraph,

    /// Incompatible operand shapes.
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// A GPR of order zero (empty coefficient vector).
    #[error("generalized Pagerank order must be at least 1")]
    InvalidOrder,

    /// Matrix expected to be symmetric is not.
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {deviation:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },

    /// A scalar argument outside its admissible range.
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    /// Non-finite input where finite values are required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Loss over an empty node mask.
    #[error("loss mask selects no nodes")]
    DegenerateLoss,

    /// An autodiff usage contract was violated (non-scalar root, repeated backward).
    #[error("autodiff contract violation: {0}")]
    Contract(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    /// A requested split cannot be formed from the labels at hand.
    #[error("split error: {0}")]
    Split(String),

    /// A dataset file is malformed; `file` names the offender.
    #[error("{file}: {detail}")]
    DataFormat { file: String, detail: String },

    /// Configuration rejected before any work was started.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
