//! The damped Newton outer loop `wₖ₊₁ = wₖ − vₖ / (1 + δₖ)`, starting at `w₀ = 0`.

use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::comm::{Cluster, CommStats};
use crate::error::{DiscoError, Result};
use crate::linalg::{norm2, DenseVec, SparseBlock};
use crate::loss::Objective;
use crate::partition::{
    balanced_sizes, partition_by_features, partition_by_samples, FeaturePartition, SamplePartition,
};

use super::layout::{FeatureLayout, SampleLayout};
use super::pcg::{
    block_diagonal_preconditioner, pcg_features_gated, pcg_samples, FeaturePreconditioner,
    InnerTolerance, NewtonStepResult, StepOutcome,
};
use super::precond::{FeatureSketch, Preconditioner};
use super::{FeaturePrecond, PartitionMode, SolverConfig};

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    /// `‖∇f(wₖ)‖` at the start of this outer iteration.
    pub grad_norm: f64,
    pub inner_iters_cum: usize,
    pub rounds_cum: u64,
    pub bytes_cum: u64,
    pub wall_ms: f64,
}

/// A Newton step taken from `w`.
#[derive(Debug, Clone)]
pub struct OuterStep {
    pub w: DenseVec,
    pub grad_norm: f64,
    pub step: NewtonStepResult,
}

#[derive(Debug, Clone)]
pub struct DiscoRun {
    pub w: DenseVec,
    pub final_grad_norm: f64,
    /// `‖∇f‖ <= outer_tol` was reached.
    pub converged: bool,
    pub steps: Vec<OuterStep>,
    pub trace: Vec<TraceRecord>,
    pub stats: CommStats,
}

impl DiscoRun {
    pub fn total_inner_iters(&self) -> usize {
        self.steps.iter().map(|s| s.step.inner_iters).sum()
    }

    /// Iterates `w₀, w₁, …, w_final`.
    pub fn iterates(&self) -> Vec<DenseVec> {
        let mut out: Vec<DenseVec> = self.steps.iter().map(|s| s.w.clone()).collect();
        out.push(self.w.clone());
        out
    }
}

/// Number of samples available to the preconditioner: the size of the
/// first shard of a balanced sample split, used by both layouts so they draw
/// on the same samples.
pub fn master_sample_count(n: usize, m: usize) -> usize {
    balanced_sizes(n, m)[0]
}

/// Partitions `(x, y)` according to `config.partition_mode` over the
/// cluster's nodes and runs the outer loop.
pub fn disco_outer(
    cluster: &mut Cluster,
    x: &SparseBlock,
    y: &DenseVec,
    config: &SolverConfig,
) -> Result<DiscoRun> {
    match config.partition_mode {
        PartitionMode::Samples => {
            let part = partition_by_samples(x, y, cluster.nodes())?;
            run_samples(cluster, &part, config)
        }
        PartitionMode::Features => {
            let part = partition_by_features(x, y, cluster.nodes())?;
            run_features(cluster, &part, config)
        }
    }
}

fn check_common(config: &SolverConfig, n: usize, m: usize) -> Result<()> {
    config.validate(master_sample_count(n, m))?;
    if config.rho != 0.0 {
        warn!("rho = {} is accepted but has no effect", config.rho);
    }
    Ok(())
}

fn diverged(iter: usize, w: &DenseVec) -> DiscoError {
    let head: Vec<String> = w.iter().take(8).map(|v| format!("{v:e}")).collect();
    let more = if w.len() > 8 { ", ..." } else { "" };
    DiscoError::Diverged {
        iter,
        dump: format!("[{}{more}] (d = {})", head.join(", "), w.len()),
    }
}

struct TraceClock {
    start: Instant,
    inner_cum: usize,
}

impl TraceClock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            inner_cum: 0,
        }
    }

    fn record(&mut self, cluster: &Cluster, outer_iter: usize, grad_norm: f64, inner: usize) -> TraceRecord {
        self.inner_cum += inner;
        let stats = cluster.snapshot_stats();
        TraceRecord {
            outer_iter,
            grad_norm,
            inner_iters_cum: self.inner_cum,
            rounds_cum: stats.total_rounds(),
            bytes_cum: stats.total_bytes(),
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn damped_update(w: &mut DenseVec, v: &DenseVec, delta: f64) -> Result<()> {
    w.add_scaled(-1.0 / (1.0 + delta), v)
}

/// Outer loop on a sample partition. `w` and all PCG vectors live on the master.
pub fn run_samples(cluster: &mut Cluster, part: &SamplePartition, config: &SolverConfig) -> Result<DiscoRun> {
    check_common(config, part.n, cluster.nodes())?;
    let objective = Objective::new(config.loss, config.lambda, part.n, part.d)?;
    let mut clock = TraceClock::new();
    let mut w = DenseVec::zeros(part.d);
    let mut steps = Vec::new();
    let mut trace = Vec::new();
    let mut precond: Option<Preconditioner> = None;

    for k in 0.. {
        let layout = SampleLayout::evaluate(cluster, part, objective, &w)?;
        let grad_norm = norm2(layout.gradient());
        if !grad_norm.is_finite() || !w.is_finite() {
            return Err(diverged(k, &w));
        }
        if grad_norm <= config.outer_tol || k >= config.max_outer {
            trace.push(clock.record(cluster, k, grad_norm, 0));
            return Ok(DiscoRun {
                w,
                final_grad_norm: grad_norm,
                converged: grad_norm <= config.outer_tol,
                steps,
                trace,
                stats: cluster.snapshot_stats(),
            });
        }
        if precond.is_none() || !config.loss.has_constant_hessian() {
            let (samples, h) = layout.master_preconditioner_samples(config.tau);
            precond = Some(Preconditioner::build(&samples, h, config.mu)?);
        }
        let eps = InnerTolerance::RelativeToGradient(config.eps_rule_theta).resolve_for(grad_norm);
        let step = pcg_samples(
            cluster,
            &layout,
            precond.as_ref().expect("built above"),
            eps,
            config,
        )?;
        let w_k = w.clone();
        damped_update(&mut w, &step.v, step.delta)?;
        trace.push(clock.record(cluster, k, grad_norm, step.inner_iters));
        steps.push(OuterStep {
            w: w_k,
            grad_norm,
            step,
        });
    }
    unreachable!()
}

/// Outer loop on a feature partition. Node `i` owns `wⁱ`; the master keeps
/// a full copy updated from the integrated `vₖ`.
pub fn run_features(cluster: &mut Cluster, part: &FeaturePartition, config: &SolverConfig) -> Result<DiscoRun> {
    check_common(config, part.n, cluster.nodes())?;
    let objective = Objective::new(config.loss, config.lambda, part.n, part.d)?;
    let mut clock = TraceClock::new();
    // Every node receives the label vector once.
    cluster.record_setup(part.n);
    // On a single node the one diagonal block is the whole preconditioner,
    // and applying it directly avoids the sketch's setup traffic.
    let mut precond: Option<FeaturePreconditioner> = match config.feature_precond {
        FeaturePrecond::Exact if cluster.nodes() > 1 => Some(FeaturePreconditioner::Exact(
            FeatureSketch::setup(cluster, part, config.tau, config.mu)?,
        )),
        _ => None,
    };

    let mut w_blocks: Vec<DenseVec> = part.sizes().into_iter().map(DenseVec::zeros).collect();
    let mut w = DenseVec::zeros(part.d);
    let mut steps = Vec::new();
    let mut trace = Vec::new();

    for k in 0.. {
        let layout = FeatureLayout::evaluate(cluster, part, objective, &w_blocks)?;
        let refresh = !config.loss.has_constant_hessian();
        match precond.as_mut() {
            Some(FeaturePreconditioner::Exact(sk)) => {
                if refresh || !sk.is_ready() {
                    sk.refresh(&layout.hess_coeffs()[..config.tau])?;
                }
            }
            Some(FeaturePreconditioner::BlockDiagonal(_)) if !refresh => {}
            _ => {
                precond = Some(block_diagonal_preconditioner(
                    cluster,
                    &layout,
                    config.tau,
                    config.mu,
                )?);
            }
        }
        let precond_ref = precond.as_ref().expect("set above");
        // At the iteration cap the solve only serves to report the gradient norm.
        let gate = if k >= config.max_outer {
            f64::INFINITY
        } else {
            config.outer_tol
        };
        let (outcome, v_blocks) = pcg_features_gated(
            cluster,
            &layout,
            precond_ref,
            InnerTolerance::RelativeToGradient(config.eps_rule_theta),
            Some(gate),
            config,
        )
        .map_err(|e| match e {
            DiscoError::NonFinite { .. } => diverged(k, &w),
            other => other,
        })?;
        match outcome {
            StepOutcome::Stationary { grad_norm } => {
                trace.push(clock.record(cluster, k, grad_norm, 0));
                return Ok(DiscoRun {
                    w,
                    final_grad_norm: grad_norm,
                    converged: grad_norm <= config.outer_tol,
                    steps,
                    trace,
                    stats: cluster.snapshot_stats(),
                });
            }
            StepOutcome::Step { grad_norm, result } => {
                let delta = result.delta;
                let updates = cluster.run_mut(&mut w_blocks, |i, wi| damped_update(wi, &v_blocks[i], delta));
                updates.into_iter().collect::<Result<Vec<_>>>()?;
                let w_k = w.clone();
                damped_update(&mut w, &result.v, delta)?;
                trace.push(clock.record(cluster, k, grad_norm, result.inner_iters));
                steps.push(OuterStep {
                    w: w_k,
                    grad_norm,
                    step: result,
                });
            }
        }
    }
    unreachable!()
}
