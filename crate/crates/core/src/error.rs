use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("duplicate label for task {task} from worker {worker}")]
    DuplicatePair { task: usize, worker: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("worker {worker} has already labelled every task")]
    ExhaustedWorker { worker: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
