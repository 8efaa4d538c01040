use thiserror::Error;

/// Errors produced by graph construction, solvers, rounding schemes and the
/// stability harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("perturbation rejected: edge {edge} weight would become {result}, below floor {floor}")]
    WeightFloor { edge: usize, result: f64, floor: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, for diagnostics.
        last: Vec<f64>,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("graph is disconnected (lambda2 <= tolerance); {0}")]
    Disconnected(String),

    #[error("instance too large for exact oracle: {0}")]
    OracleSize(String),

    #[error("EMD support too large ({atoms} atoms > {max}); use estimate_lipschitz instead")]
    EmdSupport { atoms: usize, max: usize },

    #[error("algorithm/instance mismatch: {0}")]
    AlgoMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
