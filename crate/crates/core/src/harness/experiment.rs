use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use super::{gen_synthetic, read_libsvm, write_trace, Dataset};
use crate::comm::{Cluster, CommStats, Scheduler};
use crate::error::{DiscoError, Result};
use crate::loss::{Loss, LossKind};
use crate::solver::{
    disco_outer, master_sample_count, DiscoRun, FeaturePrecond, PartitionMode, SolverConfig,
};

/// `d,n,density,noise[,seed]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n: usize,
    pub density: f64,
    pub noise: f64,
    pub seed: Option<u64>,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(format!("expected d,n,density,noise[,seed], got {s:?}"));
        }
        let num = |i: usize| parts[i].parse::<f64>().map_err(|e| format!("{:?}: {e}", parts[i]));
        let int = |i: usize| parts[i].parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[i]));
        Ok(Self {
            d: int(0)?,
            n: int(1)?,
            density: num(2)?,
            noise: num(3)?,
            seed: match parts.get(4) {
                Some(p) => Some(p.parse().map_err(|e| format!("{p:?}: {e}"))?),
                None => None,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliPartition {
    Samples,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliLoss {
    Square,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliScheduler {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliFeaturePrecond {
    Exact,
    Block,
}

/// Run the distributed damped Newton solver on a LIBSVM file or a synthetic problem.
#[derive(Debug, Clone, Parser)]
#[command(name = "disco", version)]
pub struct ExperimentArgs {
    /// LIBSVM input file.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate data instead: d,n,density,noise[,seed].
    #[arg(long)]
    pub synthetic: Option<SyntheticSpec>,
    /// Feature dimension override for --data.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum, default_value = "samples")]
    pub partition: CliPartition,
    #[arg(long, default_value_t = 1)]
    pub nodes: usize,
    #[arg(long, value_enum, default_value = "square")]
    pub loss: CliLoss,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub mu: f64,
    /// Preconditioner sample count [default: min(1000, first shard size)].
    #[arg(long)]
    pub tau: Option<usize>,
    /// Inner tolerance factor: eps_k = theta * |grad f(w_k)|.
    #[arg(long, default_value_t = 1e-4)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// PCG iteration cap per Newton step [default: min(5d, 10000)].
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Write the per-iteration trace here as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sequential")]
    pub scheduler: CliScheduler,
    /// Seed for --synthetic when its value has no fifth field.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Accepted and ignored.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Preconditioner used with --partition features.
    #[arg(long, value_enum, default_value = "exact")]
    pub feature_precond: CliFeaturePrecond,
}

impl ExperimentArgs {
    pub fn load_dataset(&self) -> Result<Dataset> {
        match (&self.data, &self.synthetic) {
            (Some(path), _) => read_libsvm(path, self.dim),
            (None, Some(s)) => Ok(gen_synthetic(s.d, s.n, s.density, s.noise, s.seed.unwrap_or(self.seed))?.dataset),
            (None, None) => Err(DiscoError::Config("one of --data or --synthetic is required".into())),
        }
    }

    pub fn solver_config(&self, data: &Dataset) -> SolverConfig {
        let kind = match self.loss {
            CliLoss::Square => LossKind::Square,
            CliLoss::Logistic => LossKind::Logistic,
        };
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            tau: self
                .tau
                .unwrap_or_else(|| master_sample_count(data.n, self.nodes.max(1)).min(1000)),
            rho: self.rho,
            loss: Loss::new(kind),
            eps_rule_theta: self.theta,
            outer_tol: self.tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner.unwrap_or((5 * data.d).min(10_000)),
            partition_mode: match self.partition {
                CliPartition::Samples => PartitionMode::Samples,
                CliPartition::Features => PartitionMode::Features,
            },
            feature_precond: match self.feature_precond {
                CliFeaturePrecond::Exact => FeaturePrecond::Exact,
                CliFeaturePrecond::Block => FeaturePrecond::BlockDiagonal,
            },
            record_inner: false,
        }
    }

    pub fn scheduler(&self) -> Scheduler {
        match self.scheduler {
            CliScheduler::Sequential => Scheduler::Sequential,
            CliScheduler::Parallel => Scheduler::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub source: String,
    pub d: usize,
    pub n: usize,
    pub config: SolverConfig,
    pub run: DiscoRun,
}

impl ExperimentSummary {
    pub fn stats(&self) -> &CommStats {
        &self.run.stats
    }
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.run.stats;
        writeln!(f, "data:              {} (d = {}, n = {})", self.source, self.d, self.n)?;
        writeln!(f, "partition:         {:?}", self.config.partition_mode)?;
        writeln!(f, "outer iterations:  {}", self.run.steps.len())?;
        writeln!(f, "converged:         {}", self.run.converged)?;
        writeln!(f, "final grad norm:   {:.6e}", self.run.final_grad_norm)?;
        writeln!(f, "inner iterations:  {}", self.run.total_inner_iters())?;
        writeln!(f, "total rounds:      {}", s.total_rounds())?;
        writeln!(f, "total bytes:       {}", s.total_bytes())?;
        writeln!(
            f,
            "  broadcast        {} rounds, {} bytes",
            s.broadcast_rounds, s.broadcast_bytes
        )?;
        writeln!(
            f,
            "  reduce-all       {} rounds, {} bytes",
            s.reduceall_rounds, s.reduceall_bytes
        )?;
        writeln!(f, "  reduce           {} rounds, {} bytes", s.reduce_rounds, s.reduce_bytes)?;
        write!(f, "  setup            {} rounds, {} bytes", s.setup_rounds, s.setup_bytes)
    }
}

/// Loads or generates the data, runs the solver and writes the trace.
pub fn run_experiment(args: &ExperimentArgs) -> Result<ExperimentSummary> {
    let data = args.load_dataset()?;
    let config = args.solver_config(&data);
    let mut cluster = Cluster::new(args.nodes, args.scheduler())?;
    let run = disco_outer(&mut cluster, &data.x, &data.y, &config)?;
    if let Some(path) = &args.trace {
        write_trace(path, &run.trace)?;
    }
    Ok(ExperimentSummary {
        source: data.source,
        d: data.d,
        n: data.n,
        config,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_spec_parses() {
        let s: SyntheticSpec = "10,20,0.5,0.1".parse().unwrap();
        assert_eq!((s.d, s.n, s.density, s.noise, s.seed), (10, 20, 0.5, 0.1, None));
        let s: SyntheticSpec = "10,20,1,0,7".parse().unwrap();
        assert_eq!(s.seed, Some(7));
        assert!("10,20".parse::<SyntheticSpec>().is_err());
        assert!("a,20,1,0".parse::<SyntheticSpec>().is_err());
    }

    #[test]
    fn defaults_follow_data_shape() {
        let args = ExperimentArgs::parse_from(["disco", "--synthetic", "40,30,0.5,0", "--nodes", "4"]);
        let data = args.load_dataset().unwrap();
        let cfg = args.solver_config(&data);
        assert_eq!(cfg.tau, 8);
        assert_eq!(cfg.max_inner, 200);
        assert_eq!(cfg.lambda, 1e-3);
    }
}
