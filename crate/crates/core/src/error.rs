use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("element {elem} is degenerate or inverted (signed volume {volume:e})")]
    DegenerateElement { elem: usize, volume: f64 },
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("continuation failed: {0}")]
    Continuation(String),
    #[error("adaptation produced an invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
