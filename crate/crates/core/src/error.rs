use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum DiscoError {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value {value} in {context}")]
    NonFinite { context: &'static str, value: f64 },

    #[error("invalid sparse structure: {0}")]
    InvalidSparse(String),

    #[error("node index {index} out of range for a cluster of {m} nodes")]
    InvalidNode { index: usize, m: usize },

    #[error("cannot split {len} {axis} across {m} nodes without an empty shard")]
    EmptyShard {
        axis: &'static str,
        len: usize,
        m: usize,
    },

    #[error(
        "preconditioner is not positive definite (pivot {pivot:e} at row {row}); \
         increase mu (currently {mu:e})"
    )]
    PreconditionerNotPd { row: usize, pivot: f64, mu: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("curvature <u, Hu> = {0:e} is not positive; the Hessian operator is not SPD")]
    NonPositiveCurvature(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite objective at outer iteration {iter}; iterate = {dump}")]
    Diverged { iter: usize, dump: String },

    #[error("dense oracle is limited to d <= {limit}, got d = {d}")]
    OracleTooLarge { d: usize, limit: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DiscoError>;

pub(crate) fn check_len(op: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(DiscoError::DimensionMismatch {
            op,
            expected,
            actual,
        })
    }
}
