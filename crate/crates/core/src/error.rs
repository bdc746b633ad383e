use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shooting bracket [{lo}, {hi}] does not straddle the target (residuals {r_lo:e}, {r_hi:e})")]
    BracketFailure { lo: f64, hi: f64, r_lo: f64, r_hi: f64 },
    #[error("no convergence after {iters} iterations; last bracket [{lo}, {hi}]")]
    NonConvergence { iters: usize, lo: f64, hi: f64 },
    #[error("tridiagonal pivot below 1e-300 at row {row}")]
    SingularPivot { row: usize },
    #[error("negative value {value:e} at node {node} persists after {halvings} step halvings")]
    Negativity { node: usize, value: f64, halvings: usize },
    #[error("at x = {x}: {source}")]
    AtStation { x: f64, #[source] source: Box<Error> },
    #[error("nonpositive w = {value:e} at interior node {node}")]
    NonPositive { node: usize, value: f64 },
    #[error("initial data rejected: {0}")]
    InadmissibleData(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("y = {y} lies beyond the grid image (max covered y = {max_y})")]
    BeyondGrid { y: f64, max_y: f64 },
    #[error("barrier constants rejected: {0}")]
    BarrierConstants(String),
    #[error("residual region contains the ridge at h = {0}")]
    RegionHasRidge(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
