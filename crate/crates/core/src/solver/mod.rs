//! Distributed inexact damped Newton solver.

mod config;
mod layout;
mod outer;
mod pcg;
mod precond;

pub use config::{FeaturePrecond, PartitionMode, SolverConfig};
pub use layout::{
    hessian_vec_features, hessian_vec_samples, FeatureHessProduct, FeatureLayout, SampleLayout,
};
pub use outer::{
    disco_outer, master_sample_count, run_features, run_samples, DiscoRun, OuterStep, TraceRecord,
};
pub use pcg::{
    block_diagonal_preconditioner, pcg_features, pcg_features_gated, pcg_samples,
    FeaturePreconditioner, InnerSnapshot, InnerTolerance, NewtonStepResult, StepOutcome,
};
pub use precond::{assemble_dense, Capacitance, FeatureSketch, Preconditioner};
