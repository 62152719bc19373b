use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum WccError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not Cartan-regular: wall distance {wall_distance:.6e} <= margin {margin:.3e}")]
    Regularity { wall_distance: f64, margin: f64 },

    #[error("flags are not transverse (delta = {delta:.3e})")]
    Transversality { delta: f64 },

    #[error("element is not loxodromic (smallest Jordan gap {gap:.3e})")]
    Loxodromy { gap: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible request: {reason} (about {estimated:.3e} candidates)")]
    Feasibility { reason: String, estimated: f64 },

    #[error("incomplete data: {0}")]
    Completeness(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WccError>;
