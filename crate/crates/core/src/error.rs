use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TeigError>;

#[derive(Debug, Error)]
pub enum TeigError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh has no interior degrees of freedom for {space}")]
    NoInteriorDofs { space: &'static str },

    #[error("refractive index {n} too close to 1 at ({x}, {y})")]
    Degenerate { n: f64, x: f64, y: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("eigensolver did not converge after {restarts} restarts; residuals {residuals:?}")]
    NoConvergence { restarts: usize, residuals: Vec<f64> },

    #[error("no left eigenvalue within tolerance of {lambda_re}{lambda_im:+}i")]
    EigenMatch { lambda_re: f64, lambda_im: f64 },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("adjoint pairing |B(x_H, y_H)| = {value:e} is below threshold {threshold:e}")]
    WeakAdjointPairing { value: f64, threshold: f64 },

    #[error("near-zero Rayleigh quotient denominator {value:e}")]
    ZeroDenominator { value: f64 },

    #[error("requested eigenvalue index {index} but only {available} physical eigenvalues were computed")]
    EigenIndex { index: usize, available: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl TeigError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TeigError::Io { path: path.into(), source }
    }
}
