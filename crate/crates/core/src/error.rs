use thiserror::Error;

use crate::reduction::EigenSolution;
use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Partial output returned alongside a convergence failure.
#[derive(Debug, Clone)]
pub struct PartialSolve {
    pub solution: EigenSolution,
    pub report: SolveReport,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("triangular factor has a zero diagonal entry at {0}")]
    SingularTriangular(usize),

    #[error("block is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("dense eigensolver did not converge within {0} iterations")]
    EigenNoConvergence(usize),

    #[error("residual requested for a zero vector")]
    ZeroVector,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{solver} did not converge: {converged} of {nev} pairs after {iterations} iterations")]
    NoConvergence {
        solver: &'static str,
        converged: usize,
        nev: usize,
        iterations: usize,
        partial: Box<PartialSolve>,
    },

    #[error("trial basis lost positive definiteness under the B inner product")]
    IllConditionedBasis,

    #[error("format error: {0}")]
    Format(String),

    #[error("missing solution for consecutive label {0}")]
    MissingSolution(usize),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Process exit status for reports that contain unconverged cells.
pub const EXIT_PARTIAL: i32 = 2;

impl Error {
    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } => EXIT_PARTIAL,
            Error::Format(_) | Error::Json(_) => 3,
            Error::OracleMismatch(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
