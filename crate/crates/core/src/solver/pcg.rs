//! Distributed preconditioned conjugate gradient for the Newton system
//! `H v = ∇f(wₖ)`, one variant per data layout.
//!
//! Both variants run the same recurrence
//!
//! ```text
//! r₀ = ∇f, s₀ = P⁻¹r₀, u₀ = s₀, v₀ = 0
//! αₜ = ⟨rₜ,sₜ⟩ / ⟨uₜ,Huₜ⟩
//! vₜ₊₁ = vₜ + αₜuₜ,  Hvₜ₊₁ = Hvₜ + αₜHuₜ,  rₜ₊₁ = rₜ − αₜHuₜ
//! sₜ₊₁ = P⁻¹rₜ₊₁,  βₜ = ⟨rₜ₊₁,sₜ₊₁⟩ / ⟨rₜ,sₜ⟩,  uₜ₊₁ = sₜ₊₁ + βₜuₜ
//! ```
//!
//! until `‖rₜ₊₁‖ <= εₖ`, and return `v` with `δ = sqrt(vₜ₊₁ᵀHvₜ + αₜ vₜ₊₁ᵀHuₜ)`.
//!
//! In the sample layout all vector work happens on the master; each
//! iteration costs one broadcast and one reduce-all of length `d`. In the
//! feature layout every node updates its own coordinate block; each
//! iteration costs one reduce-all of length `n` (inside the Hessian product)
//! and two scalar reduce-alls, and the step ends with one concatenating
//! reduce of `v`.

use crate::comm::Cluster;
use crate::error::{DiscoError, Result};
use crate::linalg::{dot_slices, norm2, DenseVec};

use super::layout::{FeatureLayout, SampleLayout};
use super::precond::{FeatureSketch, Preconditioner};
use super::SolverConfig;

/// Residual target of one inner solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerTolerance {
    Absolute(f64),
    /// `θ · ‖∇f(wₖ)‖`.
    RelativeToGradient(f64),
}

impl InnerTolerance {
    pub fn resolve_for(self, grad_norm: f64) -> f64 {
        match self {
            InnerTolerance::Absolute(eps) => eps,
            InnerTolerance::RelativeToGradient(theta) => theta * grad_norm,
        }
    }
}

/// Full-length view of the PCG state after one iteration.
#[derive(Debug, Clone)]
pub struct InnerSnapshot {
    pub v: DenseVec,
    pub r: DenseVec,
    pub hv: DenseVec,
}

#[derive(Debug, Clone)]
pub struct NewtonStepResult {
    /// Inexact Newton direction (length `d`, on the master).
    pub v: DenseVec,
    /// `sqrt(vᵀ H v)`.
    pub delta: f64,
    pub inner_iters: usize,
    pub final_residual_norm: f64,
    /// Residual tolerance reached (as opposed to hitting `max_inner`).
    pub converged: bool,
    /// Residual tolerance this solve was run against.
    pub eps: f64,
    /// Per-iteration snapshots, when `record_inner` is set.
    pub history: Vec<InnerSnapshot>,
}

impl NewtonStepResult {
    fn zero(d: usize, residual: f64, eps: f64) -> Self {
        Self {
            v: DenseVec::zeros(d),
            delta: 0.0,
            inner_iters: 0,
            final_residual_norm: residual,
            converged: true,
            eps,
            history: Vec::new(),
        }
    }
}

/// What a gated inner solve produced.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    /// `‖∇f(wₖ)‖` was at or below the gate; no step was taken.
    Stationary { grad_norm: f64 },
    Step {
        grad_norm: f64,
        result: NewtonStepResult,
    },
}

fn curvature_guard(uhu: f64) -> Result<()> {
    if uhu > 0.0 && uhu.is_finite() {
        Ok(())
    } else {
        Err(DiscoError::NonPositiveCurvature(uhu))
    }
}

/// Sample-layout PCG at the iterate `layout` was evaluated at.
///
/// The gradient exchange happened in [`SampleLayout::evaluate`]; here every
/// iteration costs exactly one Hessian product.
pub fn pcg_samples(
    cluster: &mut Cluster,
    layout: &SampleLayout<'_>,
    precond: &Preconditioner,
    eps: f64,
    config: &SolverConfig,
) -> Result<NewtonStepResult> {
    let d = layout.objective().d;
    let mut r = layout.gradient().clone();
    let r0_norm = norm2(&r);
    if r0_norm <= eps {
        return Ok(NewtonStepResult::zero(d, r0_norm, eps));
    }
    let mut s = precond.apply(&r)?;
    let mut u = s.clone();
    let mut v = DenseVec::zeros(d);
    let mut hv = DenseVec::zeros(d);
    let mut rs = dot_slices(&r, &s);
    let mut history = Vec::new();
    let mut t = 0;
    loop {
        let hu = layout.hess_vec(cluster, &u)?;
        let uhu = dot_slices(&u, &hu);
        curvature_guard(uhu)?;
        let alpha = rs / uhu;
        v.add_scaled(alpha, &u)?;
        let delta_sq = dot_slices(&v, &hv) + alpha * dot_slices(&v, &hu);
        hv.add_scaled(alpha, &hu)?;
        r.add_scaled(-alpha, &hu)?;
        s = precond.apply(&r)?;
        let rs_next = dot_slices(&r, &s);
        let r_norm = dot_slices(&r, &r).sqrt();
        let beta = rs_next / rs;
        rs = rs_next;
        for (ui, si) in u.iter_mut().zip(s.iter()) {
            *ui = si + beta * *ui;
        }
        t += 1;
        if config.record_inner {
            history.push(InnerSnapshot {
                v: v.clone(),
                r: r.clone(),
                hv: hv.clone(),
            });
        }
        let converged = r_norm <= eps;
        // A residual that has underflowed leaves no direction to search.
        let breakdown = !(rs > 0.0);
        if converged || breakdown || t >= config.max_inner {
            return Ok(NewtonStepResult {
                v,
                delta: delta_sq.max(0.0).sqrt(),
                inner_iters: t,
                final_residual_norm: r_norm,
                converged,
                eps,
                history,
            });
        }
    }
}

/// Preconditioner for the feature layout.
#[derive(Debug, Clone)]
pub enum FeaturePreconditioner {
    /// Node `i` applies only its own diagonal block.
    BlockDiagonal(Vec<Preconditioner>),
    /// The full sample-layout preconditioner, see [`FeatureSketch`].
    Exact(FeatureSketch),
}

#[derive(Debug, Clone)]
struct FeatureNodeState {
    v: DenseVec,
    r: DenseVec,
    s: DenseVec,
    u: DenseVec,
    hv: DenseVec,
}

/// Feature-layout PCG with an absolute residual target.
pub fn pcg_features(
    cluster: &mut Cluster,
    layout: &FeatureLayout<'_>,
    precond: &FeaturePreconditioner,
    eps: f64,
    config: &SolverConfig,
) -> Result<NewtonStepResult> {
    match pcg_features_gated(cluster, layout, precond, InnerTolerance::Absolute(eps), None, config)? {
        (StepOutcome::Step { result, .. }, _) => Ok(result),
        (StepOutcome::Stationary { .. }, _) => unreachable!("no gate was set"),
    }
}

/// Feature-layout PCG that also reports `‖∇f(wₖ)‖`.
///
/// Nodes only learn the gradient norm from the first step-size reduction,
/// which carries `‖r₀‖²` and `⟨r₀,s₀⟩` alongside `⟨u₀,Hu₀⟩`. If that norm is
/// at or below `gate` the solve stops there and reports
/// [`StepOutcome::Stationary`]. On a step, also returns each node's own
/// block of `v`.
pub fn pcg_features_gated(
    cluster: &mut Cluster,
    layout: &FeatureLayout<'_>,
    precond: &FeaturePreconditioner,
    tolerance: InnerTolerance,
    gate: Option<f64>,
    config: &SolverConfig,
) -> Result<(StepOutcome, Vec<DenseVec>)> {
    let objective = *layout.objective();
    let lambda = objective.lambda;
    let m = layout.nodes();

    // Replicated τ-vector Aᵀr for the exact preconditioner.
    let mut at_r = match precond {
        FeaturePreconditioner::Exact(sketch) => {
            Some(sketch.project(layout.grad_coeffs(), layout.margins(), lambda))
        }
        FeaturePreconditioner::BlockDiagonal(_) => None,
    };
    let apply = |i: usize, r: &DenseVec, y: Option<&[f64]>| -> Result<DenseVec> {
        match precond {
            FeaturePreconditioner::BlockDiagonal(blocks) => blocks[i].apply(r),
            FeaturePreconditioner::Exact(sketch) => {
                Ok(sketch.apply_block(i, r, y.expect("coefficients")))
            }
        }
    };
    let coefficients = |at_r: &Option<Vec<f64>>| -> Result<Option<Vec<f64>>> {
        match (precond, at_r) {
            (FeaturePreconditioner::Exact(sketch), Some(a)) => Ok(Some(sketch.coefficients(a)?)),
            _ => Ok(None),
        }
    };

    let y0 = coefficients(&at_r)?;
    let mut states: Vec<FeatureNodeState> = Vec::with_capacity(m);
    for i in 0..m {
        // Node-local initialisation.
        let r = layout.gradient_block(i).clone();
        let s = apply(i, &r, y0.as_deref())?;
        let len = r.len();
        states.push(FeatureNodeState {
            v: DenseVec::zeros(len),
            u: s.clone(),
            s,
            r,
            hv: DenseVec::zeros(len),
        });
    }

    let mut rs = 0.0;
    let mut eps = 0.0;
    let mut grad_norm = 0.0;
    let mut history = Vec::new();
    let mut t = 0;
    loop {
        let u_blocks: Vec<DenseVec> = states.iter().map(|st| st.u.clone()).collect();
        let hu = layout.hess_vec(cluster, &u_blocks)?;

        let first = t == 0;
        let alpha_parts = cluster.run(|i| {
            let st = &states[i];
            let mut p = vec![dot_slices(&st.u, &hu.blocks[i])];
            if first {
                p.push(dot_slices(&st.r, &st.s));
                p.push(dot_slices(&st.r, &st.r));
            }
            p
        });
        let alpha_sums = cluster.reduce_all_scalars(alpha_parts)?;
        if first {
            rs = alpha_sums[1];
            grad_norm = alpha_sums[2].sqrt();
            if !grad_norm.is_finite() {
                return Err(DiscoError::NonFinite {
                    context: "gradient norm",
                    value: grad_norm,
                });
            }
            if let Some(gate) = gate {
                if grad_norm <= gate {
                    return Ok((StepOutcome::Stationary { grad_norm }, Vec::new()));
                }
            }
            eps = tolerance.resolve_for(grad_norm);
            if grad_norm <= eps {
                let result = NewtonStepResult::zero(objective.d, grad_norm, eps);
                let blocks = states.iter().map(|st| DenseVec::zeros(st.v.len())).collect();
                return Ok((StepOutcome::Step { grad_norm, result }, blocks));
            }
        }
        let uhu = alpha_sums[0];
        curvature_guard(uhu)?;
        let alpha = rs / uhu;

        if let (FeaturePreconditioner::Exact(sketch), Some(a)) = (precond, at_r.as_mut()) {
            let at_hu = sketch.project(&hu.hz, &hu.z, lambda);
            for (ai, hi) in a.iter_mut().zip(&at_hu) {
                *ai -= alpha * hi;
            }
        }
        let y = coefficients(&at_r)?;

        let beta_parts = cluster.run_mut(&mut states, |i, st| -> Result<Vec<f64>> {
            let hu_i = &hu.blocks[i];
            st.v.add_scaled(alpha, &st.u)?;
            let delta_part = dot_slices(&st.v, &st.hv) + alpha * dot_slices(&st.v, hu_i);
            st.hv.add_scaled(alpha, hu_i)?;
            st.r.add_scaled(-alpha, hu_i)?;
            st.s = apply(i, &st.r, y.as_deref())?;
            Ok(vec![
                dot_slices(&st.r, &st.s),
                dot_slices(&st.r, &st.r),
                delta_part,
            ])
        });
        let beta_parts = beta_parts.into_iter().collect::<Result<Vec<_>>>()?;
        let beta_sums = cluster.reduce_all_scalars(beta_parts)?;
        let beta = beta_sums[0] / rs;
        rs = beta_sums[0];
        let r_norm = beta_sums[1].sqrt();
        let delta_sq = beta_sums[2];
        cluster.run_mut(&mut states, |_, st| {
            for (ui, si) in st.u.iter_mut().zip(st.s.iter()) {
                *ui = si + beta * *ui;
            }
        });
        t += 1;

        if config.record_inner {
            // Diagnostic gather; not part of the algorithm, so not metered.
            let gather = |f: fn(&FeatureNodeState) -> &DenseVec| -> DenseVec {
                states.iter().flat_map(|st| f(st).iter().copied()).collect()
            };
            history.push(InnerSnapshot {
                v: gather(|st| &st.v),
                r: gather(|st| &st.r),
                hv: gather(|st| &st.hv),
            });
        }

        let converged = r_norm <= eps;
        let breakdown = !(rs > 0.0);
        if converged || breakdown || t >= config.max_inner {
            let local: Vec<DenseVec> = states.iter().map(|st| st.v.clone()).collect();
            let v = cluster.reduce_concat(local.clone(), cluster.master())?.concat();
            let result = NewtonStepResult {
                v,
                delta: delta_sq.max(0.0).sqrt(),
                inner_iters: t,
                final_residual_norm: r_norm,
                converged,
                eps,
                history,
            };
            return Ok((StepOutcome::Step { grad_norm, result }, local));
        }
    }
}

/// Builds the block-diagonal feature preconditioner: node `i` factors the
/// block of `P` on its own features, from the first `tau` samples.
pub fn block_diagonal_preconditioner(
    cluster: &Cluster,
    layout: &FeatureLayout<'_>,
    tau: usize,
    mu: f64,
) -> Result<FeaturePreconditioner> {
    let h = &layout.hess_coeffs()[..tau];
    let blocks = cluster.run(|i| {
        let samples = layout.shard(i).x.select_cols(0..tau).transpose();
        Preconditioner::build(&samples, h, mu)
    });
    Ok(FeaturePreconditioner::BlockDiagonal(
        blocks.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}
