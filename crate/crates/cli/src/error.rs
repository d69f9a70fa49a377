use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing upstream file {path}; run `{stage}` first")]
    MissingInput { path: String, stage: &'static str },

    #[error("output path collision: {0}")]
    PathCollision(String),

    #[error(transparent)]
    Core(#[from] manifold_recon::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use manifold_recon::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Input(_)) => 2,
            CliError::Core(
                E::Numerical(_) | E::NoConvergence { .. } | E::Dimension(_) | E::Trajectory(_) | E::Sampling(_) | E::Guard(_),
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
