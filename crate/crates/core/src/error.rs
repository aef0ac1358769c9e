use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node index ({i}, {j}) out of range for {n} nodes")]
    IndexOutOfRange { i: u64, j: u64, n: u64 },

    #[error("size guard: {what} is {actual}, limit is {limit}")]
    SizeGuard {
        what: &'static str,
        actual: u64,
        limit: u64,
    },

    #[error(
        "duplicate rejection exceeded {budget} consecutive retries after {accepted} of {target} edges{}",
        block.map(|b| format!(" (block {b})")).unwrap_or_default()
    )]
    RetryBudgetExceeded {
        budget: u64,
        accepted: u64,
        target: u64,
        block: Option<usize>,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by a resource/size limit rather than bad input.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::SizeGuard { .. } | Error::RetryBudgetExceeded { .. })
    }
}
