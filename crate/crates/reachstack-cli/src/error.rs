//! Process-level errors with a stable exit-code contract:
//! 0 success, 2 config error, 3 solver failure, 4 corrupt table,
//! 5 missing dependency. Plain IO failures exit 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("corrupt table: {0}")]
    CorruptTable(String),
    #[error("missing dependency: {0}")]
    MissingDependency(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Solver(_) => 3,
            AppError::CorruptTable(_) => 4,
            AppError::MissingDependency(_) => 5,
            AppError::Io(_) => 1,
        }
    }
}

impl From<reachstack_core::SolverError> for AppError {
    fn from(e: reachstack_core::SolverError) -> Self {
        match e {
            reachstack_core::SolverError::InvalidConfig(msg) => AppError::Config(msg),
            other => AppError::Solver(other.to_string()),
        }
    }
}

impl From<reachstack_core::GridError> for AppError {
    fn from(e: reachstack_core::GridError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<reachstack_core::sim::SimError> for AppError {
    fn from(e: reachstack_core::sim::SimError) -> Self {
        AppError::Config(e.to_string())
    }
}
