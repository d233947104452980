use thiserror::Error;

pub type Result<T> = std::result::Result<T, LpsError>;

#[derive(Debug, Error)]
pub enum LpsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A design column is a linear combination of earlier ones.
    #[error("collinear design: pattern `{pattern}` is linearly dependent on earlier columns")]
    Collinear { pattern: String },

    #[error("cannot score fit: {0}")]
    Scoring(String),

    #[error("no scorable fit on the path: {0}")]
    Selection(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "pattern budget exceeded: {columns} columns requested, budget is {budget}; reduce q or enable screening"
    )]
    BudgetExceeded { columns: usize, budget: usize },

    #[error("ingest: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LpsError {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LpsError::Numerical(_)
                | LpsError::Collinear { .. }
                | LpsError::Scoring(_)
                | LpsError::Selection(_)
        )
    }
}
