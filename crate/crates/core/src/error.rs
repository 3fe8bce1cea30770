use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("search budget exceeded: {0}")]
    SearchBudgetExceeded(String),
    #[error("window generation failed after {draws} draws")]
    GenerationFailed { draws: usize },
    #[error("support is not identifiable: {0}")]
    NotIdentifiable(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported Zak period {a} (expected {expected})")]
    UnsupportedZakPeriod { a: f64, expected: f64 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("restricted column matrix is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("window overlap too large: {0}")]
    InvalidOverlap(String),
    #[error("sheared support does not admit a rectification: {0}")]
    ShearNotRectifiable(String),
    #[error("chirp parameter gives no exact period dividing 2L: {0}")]
    NonIntegerChirpPeriod(String),
    #[error("no convergence: residual history {residuals:?}")]
    NoConvergence { residuals: Vec<f64> },
    #[error("no prime window length available: {0}")]
    NoPrimeInRange(String),
    #[error("spark target not met after {draws} draws")]
    SparkTargetUnmet { draws: usize },
    #[error("rate bound not met: {0}")]
    InsufficientMargin(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
