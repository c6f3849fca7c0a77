//! Shared error type for the whole pipeline.

use thiserror::Error;

/// Errors surfaced by the arithmetic and cohomological routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero (or by a quantity indistinguishable from zero at this precision)")]
    DivisionByZero,

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("square root of an element of odd valuation is ramified: valuation {0}")]
    RamifiedRoot(i64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("matrix is singular modulo p at the requested precision")]
    SingularMatrix,

    #[error("requested depth {requested} exceeds available depth {available}")]
    DepthLoss { requested: u32, available: u32 },

    #[error("not harmonic: {0}")]
    NotHarmonic(String),

    #[error("invalid group datum: {0}")]
    BadDatum(String),

    #[error("element is not in the expected group: {0}")]
    NotInGroup(String),

    #[error("orbit enumeration did not close: {0}")]
    OrbitIncomplete(String),

    #[error("abelianization oracle unavailable for this element: {0}")]
    OracleUnavailable(String),

    #[error("cocycle identity violated: {0}")]
    CocycleViolation(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("degenerate binary form (c = 0); use the conjugate embedding")]
    DegenerateForm,

    #[error("no optimal embedding found in search region: {0}")]
    NoEmbedding(String),

    #[error("period lattices are not homothetic")]
    NotHomothetic,

    #[error("exponential outside its domain of convergence (valuation {0})")]
    ExpOutOfRange(i64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
