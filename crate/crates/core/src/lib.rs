//! Distributed inexact damped Newton solver for regularized empirical risk
//! minimization, with data partitioned either by samples or by features.
//!
//! Nodes are simulated in-process. Every byte that crosses a node boundary
//! goes through [`comm::Cluster`], which meters rounds and payload bytes per
//! collective type so the communication cost of each layout is observable.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: CSR blocks, dense vectors, block-partitioned vectors, Cholesky.
//! - [`loss`]: square and logistic losses and the regularized objective.
//! - [`comm`]: broadcast / reduce-all / concatenating reduce with cost counters.
//! - [`partition`]: contiguous balanced splits by samples or by features.
//! - [`solver`]: preconditioner, both distributed PCG variants, damped Newton outer loop.
//! - [`harness`]: LIBSVM I/O, synthetic data, dense oracles, CSV traces, the CLI driver.

pub mod comm;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod loss;
pub mod partition;
pub mod solver;

pub use error::{DiscoError, Result};
