use thiserror::Error;

pub type Result<T, E = TomoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("input is not a physical state (min eigenvalue {min_eigenvalue:e})")]
    NonPhysicalInput { min_eigenvalue: f64 },

    #[error("state recipe yields a non-physical state (min eigenvalue {min_eigenvalue:e})")]
    NonPhysicalRecipe { min_eigenvalue: f64 },

    #[error("invalid state recipe: {0}")]
    InvalidRecipe(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("design matrix is rank-deficient (rank {rank} < {required})")]
    SingularDesign { rank: usize, required: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("argument {x} outside the fit domain [0, 2]")]
    DomainError { x: f64 },

    #[error("least-squares fit with {terms} terms is ill-conditioned")]
    IllConditioned { terms: usize },

    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("unknown projector label `{label}`")]
    UnknownProjectorLabel { label: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
