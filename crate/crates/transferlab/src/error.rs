use thiserror::Error;

/// Crate-wide error type. Build and probe functions return these; the CLI
/// maps them onto exit codes (2 = build/config, 3 = unknown id, 4 = internal
/// consistency).
#[derive(Debug, Error)]
pub enum TlError {
    #[error("map value {value} escapes [0,1] at x = {x} (wrap disabled)")]
    DomainEscape { x: f64, value: f64 },

    #[error("branch weights sum to {sum}, expected 1 within 1e-12")]
    WeightSumError { sum: f64 },

    #[error("noise density integrates to {integral}, expected 1 within 1e-12")]
    NoiseNormalizationError { integral: f64 },

    #[error("row {row} defect {defect:e} exceeds {limit:e} before renormalization")]
    RowDefectTooLarge { row: usize, defect: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty cell set")]
    EmptySupport,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("cyclic class {class} of component {component} fails the one-step check by {error:e}")]
    CyclicClassMismatch { component: usize, class: usize, error: f64 },

    #[error("adjoint indicator sequence decreased at step {step} by {drop:e}")]
    MonotonicityViolation { step: usize, drop: f64 },

    #[error("matrix has {count} recurrent components; a unique invariant density is required")]
    MultipleComponents { count: usize },

    #[error("component has period {period}; this probe requires period 1")]
    PeriodNotOne { period: usize },

    #[error("observable support escapes the component support at cell {cell}")]
    SupportViolation { cell: usize },

    #[error("unknown gallery id {0:?}")]
    UnknownId(String),

    #[error("constant piece produced a non-finite image in cell {cell}")]
    ZeroSlopeOverlap { cell: usize },

    #[error("invalid system spec: {0}")]
    InvalidSpec(String),

    #[error("matrix file parse error at line {line}: {message}")]
    MatrixParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TlError>;
