use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("generator index {index} out of range for a group with {rank} generators")]
    IndexOutOfRange { index: u32, rank: usize },

    #[error("group specifications do not match: {0}")]
    SpecMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("no entry stored for fraction {0}")]
    MissingEntry(String),

    #[error("block matrix is not invariant under the group action (residual {residual:.3e})")]
    NotInvariant { residual: f64 },

    #[error("matrix is not an isometry (residual {residual:.3e})")]
    NotIsometry { residual: f64 },

    #[error("inconsistent constraints: {0}")]
    Inconsistent(String),

    #[error("step cap of {0} exceeded")]
    StepCapExceeded(usize),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
