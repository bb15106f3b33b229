use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Exhaustive enumeration would visit more subsets than allowed.
    #[error("enumeration budget exceeded: {needed} subsets requested, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("insufficient rows for subspace method: {rows} rows available, estimated rank {rank}")]
    InsufficientRows { rows: usize, rank: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::BudgetExceeded { .. }
                | Error::InsufficientRows { .. }
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}
