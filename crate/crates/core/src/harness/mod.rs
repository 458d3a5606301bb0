//! Data ingestion, synthetic problems, dense reference solvers, traces and
//! the experiment driver behind the `disco` binary.

mod experiment;
mod libsvm;
mod oracle;
mod synthetic;
mod trace;

pub use experiment::{run_experiment, ExperimentArgs, ExperimentSummary, SyntheticSpec};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use oracle::{
    dense_gradient, dense_hessian, dense_newton_oracle, newton_direction, ridge_solution,
    OracleRun, ORACLE_MAX_DIM,
};
pub use synthetic::{gen_synthetic, SyntheticData};
pub use trace::{read_trace, write_trace, TRACE_HEADER};

use crate::error::{DiscoError, Result};
use crate::linalg::{DenseVec, SparseBlock};

/// A feature-major data matrix (`d × n`, column `j` is sample `j`) with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: SparseBlock,
    pub y: DenseVec,
    pub d: usize,
    pub n: usize,
    /// Where the data came from, for reports.
    pub source: String,
}

impl Dataset {
    pub fn new(x: SparseBlock, y: DenseVec, source: impl Into<String>) -> Result<Self> {
        let (d, n) = (x.rows(), x.cols());
        if d == 0 || n == 0 {
            return Err(DiscoError::Config(format!("empty dataset ({d} x {n})")));
        }
        crate::error::check_len("dataset labels", n, y.len())?;
        Ok(Self {
            x,
            y,
            d,
            n,
            source: source.into(),
        })
    }
}
