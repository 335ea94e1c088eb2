use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("task index {index} out of range 1..={max}")]
    TaskIndex { index: usize, max: usize },
    #[error("rank-deficient source head matrix (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}); the source heads must span the representation space")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("infeasible linear system: target head is outside the span of the source heads")]
    Infeasible,
    #[error("infeasible budget: N_tot = {n_tot} < T * N_floor = {required}")]
    InfeasibleBudget { n_tot: u64, required: u64 },
    #[error("relevance coordinate {0} is nonzero but receives no samples")]
    ZeroAllocation(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("linear program did not terminate within {0} pivots")]
    PivotLimit(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
