use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, KineticError>;

#[derive(Debug, thiserror::Error)]
pub enum KineticError {
    #[error(transparent)]
    Core(#[from] kinetic_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("all {0} replicates aborted")]
    AllAborted(u64),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl KineticError {
    pub fn config(msg: impl Into<String>) -> Self {
        KineticError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KineticError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for bad inputs, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            KineticError::Core(e) if e.is_configuration() => 2,
            KineticError::Config(_) | KineticError::Parse { .. } => 2,
            _ => 1,
        }
    }
}
