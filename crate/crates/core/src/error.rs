use thiserror::Error;
use wardrop_qp::{QpError, QpStatus};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("link {link} has negative or non-finite cost {value}")]
    NegativeCost { link: usize, value: f64 },
    /// Node ids are 1-based, as in the input files.
    #[error("class {class}: destination {destination} is unreachable from origin {origin}")]
    Unreachable {
        class: usize,
        origin: usize,
        destination: usize,
    },
    #[error("flows violate conservation: residual {0:e}")]
    Infeasible(f64),
    #[error("QP solver stopped with status {status} after {iterations} iterations (primal residual {primal:e}, dual residual {dual:e})")]
    Solver {
        status: QpStatus,
        iterations: usize,
        primal: f64,
        dual: f64,
    },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
