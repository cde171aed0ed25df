use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("breakpoint data invalid: {0}")]
    Breakpoints(String),

    #[error("grid mismatch: left has {left} samples, right has {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("spectrum outside [0,1]: eigenvalue {value} at t = {t} (allowed fuzz {tol})")]
    Spectrum { value: f64, t: f64, tol: f64 },

    #[error("matrix not self-adjoint: hermitian defect {defect} at t = {t}")]
    NotSelfAdjoint { defect: f64, t: f64 },

    #[error("not a contraction: norm {norm} at t = {t}")]
    NotContraction { norm: f64, t: f64 },

    #[error("square-zero defect {defect} at t = {t} exceeds tolerance {tol}")]
    NotSquareZero { defect: f64, t: f64, tol: f64 },

    #[error("construction infeasible: {0}")]
    ConstructionInfeasible(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
