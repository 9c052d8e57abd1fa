use photocount_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),

    #[error("solver: {0}")]
    Solver(#[from] CoreError),

    #[error("io: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            ScenarioError::Solver(_) => 3,
            ScenarioError::Io(_) => 4,
        }
    }

    /// Machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Config(_) => "config",
            ScenarioError::Solver(_) => "solver",
            ScenarioError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ScenarioError>;
