use serde::{Deserialize, Serialize};

use crate::error::{DiscoError, Result};
use crate::loss::{Loss, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Columns of `X` split across nodes; PCG vector work on the master.
    #[default]
    Samples,
    /// Rows of `X` split across nodes; every node owns a coordinate block.
    Features,
}

/// How the feature layout applies the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeaturePrecond {
    /// The same subsampled preconditioner as the sample layout, applied
    /// through a low-rank identity whose `τ`-dimensional coefficients every
    /// node can update from already-replicated quantities. Requires `μ > 0`.
    #[default]
    Exact,
    /// Each node keeps only its own diagonal block of the preconditioner.
    BlockDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// ℓ2 regularization weight, `> 0`.
    pub lambda: f64,
    /// Preconditioner shift, `>= 0`.
    pub mu: f64,
    /// Number of master samples used to build the preconditioner.
    pub tau: usize,
    /// Accepted for completeness; no step of the method reads it.
    pub rho: f64,
    pub loss: Loss,
    /// Inner tolerance `εₖ = θ ‖∇f(wₖ)‖`.
    pub eps_rule_theta: f64,
    /// Stop once `‖∇f(wₖ)‖ <= outer_tol`; zero runs until `max_outer`.
    pub outer_tol: f64,
    /// Maximum number of Newton steps.
    pub max_outer: usize,
    pub max_inner: usize,
    pub partition_mode: PartitionMode,
    pub feature_precond: FeaturePrecond,
    /// Keep a full-vector snapshot of every PCG iterate (diagnostics only).
    pub record_inner: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            mu: 1e-4,
            tau: 1000,
            rho: 0.0,
            loss: Loss::new(LossKind::Square),
            eps_rule_theta: 1e-4,
            outer_tol: 1e-8,
            max_outer: 50,
            max_inner: 10_000,
            partition_mode: PartitionMode::Samples,
            feature_precond: FeaturePrecond::Exact,
            record_inner: false,
        }
    }
}

impl SolverConfig {
    /// Checks parameter ranges; `master_samples` is the number of samples the
    /// preconditioner may draw from.
    pub fn validate(&self, master_samples: usize) -> Result<()> {
        let bad = |msg: String| Err(DiscoError::Config(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if !(self.rho >= 0.0) {
            return bad(format!("rho must be >= 0, got {}", self.rho));
        }
        if self.tau == 0 || self.tau > master_samples {
            return bad(format!(
                "tau must lie in [1, {master_samples}] (master shard size), got {}",
                self.tau
            ));
        }
        if !(self.eps_rule_theta > 0.0) {
            return bad(format!("theta must be > 0, got {}", self.eps_rule_theta));
        }
        if !(self.outer_tol >= 0.0) {
            return bad(format!("outer tolerance must be >= 0, got {}", self.outer_tol));
        }
        if self.max_inner == 0 {
            return bad("max_inner must be >= 1".into());
        }
        if self.partition_mode == PartitionMode::Features
            && self.feature_precond == FeaturePrecond::Exact
            && self.mu == 0.0
        {
            return bad("the exact feature-layout preconditioner needs mu > 0; \
                        use a positive mu or the block-diagonal variant"
                .into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let cfg = SolverConfig {
            tau: 10,
            ..Default::default()
        };
        cfg.validate(10).unwrap();
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let base = SolverConfig {
            tau: 4,
            ..Default::default()
        };
        assert!(base.validate(3).is_err());
        assert!(SolverConfig { tau: 0, ..base.clone() }.validate(10).is_err());
        assert!(SolverConfig { lambda: 0.0, ..base.clone() }.validate(10).is_err());
        assert!(SolverConfig { mu: -1.0, ..base.clone() }.validate(10).is_err());
        assert!(SolverConfig { max_inner: 0, ..base.clone() }.validate(10).is_err());
        assert!(SolverConfig { eps_rule_theta: 0.0, ..base.clone() }.validate(10).is_err());
        let exact_without_shift = SolverConfig {
            mu: 0.0,
            partition_mode: PartitionMode::Features,
            ..base.clone()
        };
        assert!(exact_without_shift.validate(10).is_err());
        let block = SolverConfig {
            feature_precond: FeaturePrecond::BlockDiagonal,
            ..exact_without_shift
        };
        block.validate(10).unwrap();
    }
}
