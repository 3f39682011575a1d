use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("QR iteration did not converge after {sweeps} sweeps (dimension {n})")]
    NoConvergence { n: usize, sweeps: usize },

    #[error("inverse iteration did not converge: residual {residual:e} after {iterations} iterations")]
    InverseIteration { residual: f64, iterations: usize },

    #[error("polynomial root iteration did not converge (degree {degree})")]
    RootIteration { degree: usize },

    #[error("quartet analysis needs an even lattice size, got L = {0}")]
    OddLattice(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
