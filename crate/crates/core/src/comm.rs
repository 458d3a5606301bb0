//! Simulated collective communication over `m` in-process nodes.
//!
//! Each collective is a single logical round: its cost is one round plus
//! `8 × elements` payload bytes, regardless of `m`. A cluster of one node
//! still meters its collectives.
//!
//! Node-local work runs through [`Cluster::run`] / [`Cluster::run_mut`],
//! either sequentially or on the rayon pool. Reductions always sum in
//! ascending node order, so both schedulers give bit-identical results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, DiscoError, Result};
use crate::linalg::{DenseVec, PartitionedVec};

pub const BYTES_PER_ELEMENT: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    #[default]
    Sequential,
    Parallel,
}

/// Round and byte counters per collective type.
///
/// One-off setup traffic (label replication, preconditioner sketches) is
/// kept in its own counters and excluded from [`CommStats::total_rounds`] and
/// [`CommStats::total_bytes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CommStats {
    pub broadcast_rounds: u64,
    pub reduce_rounds: u64,
    pub reduceall_rounds: u64,
    pub broadcast_bytes: u64,
    pub reduce_bytes: u64,
    pub reduceall_bytes: u64,
    pub setup_rounds: u64,
    pub setup_bytes: u64,
}

impl CommStats {
    pub fn total_rounds(&self) -> u64 {
        self.broadcast_rounds + self.reduce_rounds + self.reduceall_rounds
    }

    pub fn total_bytes(&self) -> u64 {
        self.broadcast_bytes + self.reduce_bytes + self.reduceall_bytes
    }

    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &CommStats) -> CommStats {
        CommStats {
            broadcast_rounds: self.broadcast_rounds - earlier.broadcast_rounds,
            reduce_rounds: self.reduce_rounds - earlier.reduce_rounds,
            reduceall_rounds: self.reduceall_rounds - earlier.reduceall_rounds,
            broadcast_bytes: self.broadcast_bytes - earlier.broadcast_bytes,
            reduce_bytes: self.reduce_bytes - earlier.reduce_bytes,
            reduceall_bytes: self.reduceall_bytes - earlier.reduceall_bytes,
            setup_rounds: self.setup_rounds - earlier.setup_rounds,
            setup_bytes: self.setup_bytes - earlier.setup_bytes,
        }
    }

    fn add(&mut self, other: &CommStats) {
        self.broadcast_rounds += other.broadcast_rounds;
        self.reduce_rounds += other.reduce_rounds;
        self.reduceall_rounds += other.reduceall_rounds;
        self.broadcast_bytes += other.broadcast_bytes;
        self.reduce_bytes += other.reduce_bytes;
        self.reduceall_bytes += other.reduceall_bytes;
        self.setup_rounds += other.setup_rounds;
        self.setup_bytes += other.setup_bytes;
    }
}

/// A barrier-synchronised group of `m` simulated nodes. Node 0 is the master.
#[derive(Debug, Clone)]
pub struct Cluster {
    m: usize,
    master: usize,
    scheduler: Scheduler,
    stats: CommStats,
}

impl Cluster {
    pub fn new(m: usize, scheduler: Scheduler) -> Result<Self> {
        if m == 0 {
            return Err(DiscoError::Config("cluster needs at least one node".into()));
        }
        Ok(Self {
            m,
            master: 0,
            scheduler,
            stats: CommStats::default(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn master(&self) -> usize {
        self.master
    }

    pub fn scheduler(&self) -> Scheduler {
        self.scheduler
    }

    fn check_node(&self, index: usize) -> Result<()> {
        if index < self.m {
            Ok(())
        } else {
            Err(DiscoError::InvalidNode { index, m: self.m })
        }
    }

    /// Runs `f(node)` on every node and returns the outputs in node order.
    pub fn run<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self.scheduler {
            Scheduler::Sequential => (0..self.m).map(f).collect(),
            Scheduler::Parallel => (0..self.m).into_par_iter().map(f).collect(),
        }
    }

    /// Like [`Cluster::run`] but gives each node mutable access to its own state.
    pub fn run_mut<S, T, F>(&self, states: &mut [S], f: F) -> Vec<T>
    where
        S: Send,
        T: Send,
        F: Fn(usize, &mut S) -> T + Sync + Send,
    {
        assert_eq!(states.len(), self.m, "one state per node");
        match self.scheduler {
            Scheduler::Sequential => states.iter_mut().enumerate().map(|(i, s)| f(i, s)).collect(),
            Scheduler::Parallel => states
                .par_iter_mut()
                .enumerate()
                .map(|(i, s)| f(i, s))
                .collect(),
        }
    }

    /// Copies `payload` from node `from` to every node.
    pub fn broadcast(&mut self, from: usize, payload: &DenseVec) -> Result<Vec<DenseVec>> {
        self.check_node(from)?;
        self.stats.broadcast_rounds += 1;
        self.stats.broadcast_bytes += BYTES_PER_ELEMENT * payload.len() as u64;
        Ok(vec![payload.clone(); self.m])
    }

    /// Element-wise sum of one contribution per node, delivered to all nodes.
    pub fn reduce_all(&mut self, contributions: Vec<DenseVec>) -> Result<Vec<DenseVec>> {
        check_len("reduce_all (contributions)", self.m, contributions.len())?;
        let len = contributions[0].len();
        for c in &contributions[1..] {
            check_len("reduce_all (payload length)", len, c.len())?;
        }
        let mut iter = contributions.into_iter();
        let mut sum = iter.next().expect("m >= 1");
        for c in iter {
            for (s, v) in sum.iter_mut().zip(c.iter()) {
                *s += v;
            }
        }
        self.stats.reduceall_rounds += 1;
        self.stats.reduceall_bytes += BYTES_PER_ELEMENT * len as u64;
        Ok(vec![sum; self.m])
    }

    /// Scalar reduce-all: a reduce-all whose payload is `parts[i]` from node `i`.
    /// Returns the summed payload (identical on every node).
    pub fn reduce_all_scalars(&mut self, parts: Vec<Vec<f64>>) -> Result<Vec<f64>> {
        let contributions = parts.into_iter().map(DenseVec::from_vec).collect();
        let mut out = self.reduce_all(contributions)?;
        Ok(out.swap_remove(0).into_vec())
    }

    /// Gathers per-node blocks, in node order, onto node `to`.
    pub fn reduce_concat(&mut self, blocks: Vec<DenseVec>, to: usize) -> Result<PartitionedVec> {
        self.check_node(to)?;
        check_len("reduce_concat (blocks)", self.m, blocks.len())?;
        let total: usize = blocks.iter().map(|b| b.len()).sum();
        self.stats.reduce_rounds += 1;
        self.stats.reduce_bytes += BYTES_PER_ELEMENT * total as u64;
        Ok(PartitionedVec::from_blocks(blocks))
    }

    /// Meters a one-off setup transfer of `elements` values.
    pub fn record_setup(&mut self, elements: usize) {
        self.stats.setup_rounds += 1;
        self.stats.setup_bytes += BYTES_PER_ELEMENT * elements as u64;
    }

    pub fn snapshot_stats(&self) -> CommStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = CommStats::default();
    }
}

/// Closed-form communication counts for both layouts.
///
/// These mirror the per-collective costs the solver issues and are used to
/// check the metered counters exactly.
pub mod cost_model {
    use super::{CommStats, BYTES_PER_ELEMENT as B};

    /// Scalars carried by the first step-size reduction of a feature-layout
    /// PCG run: `⟨u,Hu⟩`, `⟨r₀,s₀⟩` and `‖r₀‖²`.
    pub const FEATURE_ALPHA0_SCALARS: u64 = 3;
    /// Scalars carried by every later step-size reduction: `⟨u,Hu⟩`.
    pub const FEATURE_ALPHA_SCALARS: u64 = 1;
    /// Scalars carried by every direction-update reduction:
    /// `⟨r,s⟩`, `‖r‖²` and `vᵀHv`.
    pub const FEATURE_BETA_SCALARS: u64 = 3;

    /// Gradient evaluation in the sample layout: broadcast `w`, reduce-all the
    /// local gradient sums.
    pub fn samples_gradient(d: usize) -> CommStats {
        let d = d as u64;
        CommStats {
            broadcast_rounds: 1,
            broadcast_bytes: B * d,
            reduceall_rounds: 1,
            reduceall_bytes: B * d,
            ..Default::default()
        }
    }

    /// `t` PCG iterations in the sample layout: one broadcast of `u` and one
    /// reduce-all of the local Hessian products per iteration.
    pub fn samples_pcg(d: usize, t: usize) -> CommStats {
        let (d, t) = (d as u64, t as u64);
        CommStats {
            broadcast_rounds: t,
            broadcast_bytes: B * d * t,
            reduceall_rounds: t,
            reduceall_bytes: B * d * t,
            ..Default::default()
        }
    }

    /// Gradient evaluation in the feature layout: one reduce-all of the
    /// length-`n` margin vector.
    pub fn features_gradient(n: usize) -> CommStats {
        CommStats {
            reduceall_rounds: 1,
            reduceall_bytes: B * n as u64,
            ..Default::default()
        }
    }

    /// `t >= 1` PCG iterations in the feature layout followed by the block
    /// integration of `v` (`d` values in total). Each iteration performs one
    /// length-`n` reduce-all and two scalar reduce-alls.
    pub fn features_pcg(n: usize, d: usize, t: usize) -> CommStats {
        assert!(t >= 1, "a feature-layout PCG run performs at least one iteration");
        let (n, d, t) = (n as u64, d as u64, t as u64);
        let scalars = FEATURE_ALPHA0_SCALARS
            + (t - 1) * FEATURE_ALPHA_SCALARS
            + t * FEATURE_BETA_SCALARS;
        CommStats {
            reduceall_rounds: 3 * t,
            reduceall_bytes: B * (n * t + scalars),
            reduce_rounds: 1,
            reduce_bytes: B * d,
            ..Default::default()
        }
    }

    /// The closing gradient check of a feature-layout run. The gradient norm
    /// arrives on the first step-size reduction, so the check costs the
    /// margin reduce-all, one Hessian-product reduce-all and that scalar
    /// reduction.
    pub fn features_final_check(n: usize) -> CommStats {
        let n = n as u64;
        CommStats {
            reduceall_rounds: 3,
            reduceall_bytes: B * (2 * n + FEATURE_ALPHA0_SCALARS),
            ..Default::default()
        }
    }

    /// Total for a run given the inner-iteration count of each completed
    /// Newton step. Every run ends with exactly one gradient check that does
    /// not produce a step.
    pub fn run_total(features: bool, n: usize, d: usize, inner_iters: &[usize]) -> CommStats {
        let mut total = CommStats::default();
        for &t in inner_iters {
            if features {
                total.add(&features_gradient(n));
                total.add(&features_pcg(n, d, t));
            } else {
                total.add(&samples_gradient(d));
                total.add(&samples_pcg(d, t));
            }
        }
        if features {
            total.add(&features_final_check(n));
        } else {
            total.add(&samples_gradient(d));
        }
        total
    }

    /// Bytes moved per PCG iteration (ignoring the once-per-step extras).
    pub fn bytes_per_inner_iteration(features: bool, n: usize, d: usize) -> u64 {
        if features {
            B * (n as u64 + FEATURE_ALPHA_SCALARS + FEATURE_BETA_SCALARS)
        } else {
            2 * B * d as u64
        }
    }
}
