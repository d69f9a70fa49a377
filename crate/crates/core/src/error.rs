use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error in field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("eigen solver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("trajectory error: {0}")]
    Trajectory(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("{0}")]
    Guard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(field: &'static str, detail: String) -> Self {
        Error::Format { field, detail }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
