use thiserror::Error;

/// Errors raised by the simulator. Every variant is a rejected input or an
/// enumeration that would exceed the configured cap; nothing here signals a
/// recoverable numerical condition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not an orthogonal projector: {reason}")]
    NotProjector { reason: String },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("negative step count {0}: only forward evolution is supported")]
    NegativeSteps(i64),

    #[error("{scheme} stencil needs at least {needed} slots, grid has {found}")]
    TooFewSlots {
        scheme: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("invalid projection family at slot {slot}: {reason}")]
    InvalidFamily { slot: usize, reason: String },

    #[error("invalid history index: {0}")]
    InvalidHistory(String),

    #[error("invalid history density: {0}")]
    InvalidDensity(String),

    #[error("enumeration of {count} histories exceeds cap {cap}")]
    CapExceeded { count: u128, cap: usize },

    #[error("history at {index:?} selects a projector of rank {rank} at slot {slot}; rank 1 required")]
    CoarseGrained {
        index: Vec<usize>,
        slot: usize,
        rank: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
