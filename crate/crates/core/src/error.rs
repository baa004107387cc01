use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("need moments up to order {needed}, have order {available}")]
    InsufficientMoments { needed: usize, available: usize },

    /// 1-based index of the pivot that fell below the positive-definiteness floor.
    #[error(
        "moment matrix is not positive definite (pivot {pivot} = {value:e}); \
         the data has too few effective support points, reduce N"
    )]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("moment functional is degenerate at degree {degree}")]
    DegenerateMeasure { degree: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("root bracketing failed: {0}")]
    BracketFailure(String),

    #[error("moment targets are infeasible on the grid: {0}")]
    Infeasible(String),

    #[error("outside the feasible domain: {0}")]
    Domain(String),

    #[error("objective is unbounded: {0}")]
    Unbounded(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Failures caused by the data carrying too little information for the
    /// requested number of nodes.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_)
                | Error::NotPositiveDefinite { .. }
                | Error::DegenerateMeasure { .. }
        )
    }
}
