use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unimplemented smoothness degree s = {0} (supported: 1, 2, 3)")]
    UnimplementedSmoothness(u32),

    #[error("invalid kernel spec: {0}")]
    InvalidKernel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate centers {first} and {second} (distance {distance:e})")]
    DuplicateCenters {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("kernel matrix is numerically indefinite (Cholesky factorization failed)")]
    NumericallyIndefinite,

    #[error("trajectory diverged: non-finite state after substep {substep}")]
    TrajectoryDiverged { substep: usize },

    #[error("flow failed for center {center}, triplet {triplet}: {source}")]
    Collection {
        center: usize,
        triplet: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("excitation failure: no input set with sigma_min >= {threshold} after {attempts} attempts")]
    ExcitationFailure { threshold: f64, attempts: usize },

    #[error("rank-deficient input matrix for center {center} (sigma_min = {sigma_min:e})")]
    RankDeficient { center: usize, sigma_min: f64 },

    #[error("missing bound constant {0}: supply it in the config or calibrate it from a validation run")]
    MissingConstant(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{}:{line}: field `{field}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        field: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
