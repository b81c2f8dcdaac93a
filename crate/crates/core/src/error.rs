use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    SymmetryViolation { i: usize, j: usize, diff: f64 },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },

    #[error("graph is disconnected: {zero_count} eigenvalues below {zero_tol:e}")]
    DisconnectedGraph { zero_count: usize, zero_tol: f64 },

    #[error("Fiedler eigenvalue is not simple (gap {gap:e})")]
    DegenerateFiedler { gap: f64 },

    #[error("unlabeled block is singular: smallest eigenvalue {min_eigenvalue:e}")]
    SingularUnlabeledBlock { min_eigenvalue: f64 },

    #[error("labels have zero variance")]
    ZeroVarianceLabels,

    #[error("invalid batch layout: {0}")]
    InvalidLayout(String),

    #[error("blackbox step must be positive, got {0}")]
    InvalidStep(f64),

    #[error("need at least 2 observations, got {0}")]
    InsufficientObservations(usize),

    #[error("feature {0} has zero norm")]
    ZeroNormFeature(usize),

    #[error("budget {budget} is invalid for {n} items")]
    InvalidBudget { budget: usize, n: usize },

    #[error("exhaustive search over {0} subsets exceeds the limit")]
    TooLarge(u128),

    #[error("spectrum is degenerate: eigengap {0:e}")]
    DegenerateSpectrum(f64),

    #[error("batch of {got} samples is too small (need {need})")]
    BatchTooSmall { got: usize, need: usize },

    #[error("kernel matrix is not positive definite even with jitter {0:e}")]
    KernelNotPD(f64),

    #[error("invalid split: {0}")]
    InvalidFraction(String),

    #[error("R² is undefined for targets with zero variance")]
    UndefinedR2,

    #[error("dataset not found: {0}")]
    DataNotFound(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, state: Box<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
