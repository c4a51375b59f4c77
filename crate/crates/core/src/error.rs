use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid boundary tagging: {0}")]
    Tagging(String),

    #[error("unsupported quadrature degree {0} (supported: 1..=10)")]
    QuadratureDegree(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("spaces are defined on different meshes")]
    MeshMismatch,

    #[error("boundary face {0} has no second side")]
    NoSecondSide(usize),

    #[error("perturbed load requested but no perturbation data is set")]
    MissingPerturbation,

    #[error("reference norm vanishes on the requested subdomain")]
    ZeroDenominator,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("iteration stagnated after {iterations} iterations (relative residual {relative_residual:e})")]
    Stagnation {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for solver failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_) | Error::Stagnation { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
