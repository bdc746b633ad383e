use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}: {message}")]
    Config { origin: String, line: usize, message: String },
    #[error("{origin}: {message}")]
    ConfigValue { origin: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] vonmises::Error),
}

impl CliError {
    /// 2 for configuration and input/output problems, 1 when a computation fails.
    pub fn exit_code(&self) -> u8 {
        use vonmises::Error as E;
        match self {
            CliError::Core(E::AtStation { .. })
            | CliError::Core(E::Negativity { .. })
            | CliError::Core(E::NonPositive { .. })
            | CliError::Core(E::NonConvergence { .. })
            | CliError::Core(E::BracketFailure { .. })
            | CliError::Core(E::SingularPivot { .. })
            | CliError::Core(E::InsufficientData(_))
            | CliError::Core(E::BeyondGrid { .. })
            | CliError::Core(E::BarrierConstants(_))
            | CliError::Core(E::RegionHasRidge(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
