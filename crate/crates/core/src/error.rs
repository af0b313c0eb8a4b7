use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("scalar backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("cannot add values carrying pi^{left} and pi^{right}")]
    PiExponentMismatch { left: i32, right: i32 },

    #[error("division by zero")]
    DivisionByZero,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular matrix ({0})")]
    Singular(String),

    #[error("moment index ({k}, {m}) outside validity window |k|,|m| <= {max}")]
    OutsideWindow { k: i32, m: i32, max: i32 },

    #[error(
        "quadrature for moment ({k}, {m}) did not converge: last {last}, previous {previous}, relative gap {gap:e}"
    )]
    NonConvergence { k: i32, m: i32, last: String, previous: String, gap: f64 },

    #[error("exact moments unavailable: {0}")]
    NotExact(String),

    #[error("non-integrable weight: {0}")]
    NonIntegrable(String),

    #[error("joint matrix rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("relation system inconsistent at degree {degree}, axis {axis}: {detail}")]
    Inconsistent { degree: usize, axis: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}
