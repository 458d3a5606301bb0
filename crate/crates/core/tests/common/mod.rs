#![allow(dead_code)]

use disco::comm::{Cluster, CommStats, Scheduler};
use disco::harness::{gen_synthetic, Dataset};
use disco::linalg::{norm2, DenseVec, PartitionedVec};
use disco::loss::Objective;
use disco::partition::{partition_by_features, partition_by_samples};
use disco::solver::{
    master_sample_count, pcg_features, pcg_samples, FeatureLayout, FeaturePreconditioner,
    FeatureSketch, NewtonStepResult, Preconditioner, SampleLayout, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn scalar_rel_err(a: f64, b: f64) -> f64 {
    let s = b.abs();
    if s == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / s
    }
}

/// A random ridge instance with `d <= 50`, `n <= 200` and `m ∈ {1, 2, 4}`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub data: Dataset,
    pub m: usize,
    pub config: SolverConfig,
}

pub fn ridge_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = [1, 2, 4][i % 3];
            // Every shard holds at least 4d samples, so the master's local
            // Hessian approximates the global one well and inner solves stay short.
            let n = rng.gen_range(16 * m..=200);
            let d = rng.gen_range(m.max(2)..=(n / (4 * m)).clamp(m.max(2), 50));
            let density = rng.gen_range(0.2..=1.0);
            let noise = rng.gen_range(0.0..0.5);
            let data = gen_synthetic(d, n, density, noise, rng.gen()).unwrap().dataset;
            let lambda = [1e-1, 1e-2][i % 2];
            let config = SolverConfig {
                lambda,
                mu: lambda,
                tau: master_sample_count(n, m),
                ..Default::default()
            };
            Instance { data, m, config }
        })
        .collect()
}

pub fn random_w(d: usize, seed: u64) -> DenseVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// One sample-layout inner solve at `w` with absolute tolerance `eps`.
pub fn samples_direction(
    inst: &Instance,
    w: &DenseVec,
    eps: f64,
) -> (NewtonStepResult, DenseVec, CommStats) {
    let part = partition_by_samples(&inst.data.x, &inst.data.y, inst.m).unwrap();
    let obj = Objective::new(inst.config.loss, inst.config.lambda, inst.data.n, inst.data.d).unwrap();
    let mut cluster = Cluster::new(inst.m, Scheduler::Sequential).unwrap();
    let layout = SampleLayout::evaluate(&mut cluster, &part, obj, w).unwrap();
    let (samples, h) = layout.master_preconditioner_samples(inst.config.tau);
    let p = Preconditioner::build(&samples, h, inst.config.mu).unwrap();
    let before = cluster.snapshot_stats();
    let step = pcg_samples(&mut cluster, &layout, &p, eps, &inst.config).unwrap();
    let stats = cluster.snapshot_stats().since(&before);
    (step, layout.gradient().clone(), stats)
}

/// One feature-layout inner solve at `w` with the exact preconditioner.
pub fn features_direction(
    inst: &Instance,
    w: &DenseVec,
    eps: f64,
) -> (NewtonStepResult, DenseVec, CommStats) {
    let part = partition_by_features(&inst.data.x, &inst.data.y, inst.m).unwrap();
    let obj = Objective::new(inst.config.loss, inst.config.lambda, inst.data.n, inst.data.d).unwrap();
    let mut cluster = Cluster::new(inst.m, Scheduler::Sequential).unwrap();
    let mut sketch = FeatureSketch::setup(&mut cluster, &part, inst.config.tau, inst.config.mu).unwrap();
    let w_blocks = PartitionedVec::split(w, &part.sizes()).unwrap().blocks().to_vec();
    let layout = FeatureLayout::evaluate(&mut cluster, &part, obj, &w_blocks).unwrap();
    sketch.refresh(&layout.hess_coeffs()[..inst.config.tau]).unwrap();
    let precond = FeaturePreconditioner::Exact(sketch);
    let before = cluster.snapshot_stats();
    let step = pcg_features(&mut cluster, &layout, &precond, eps, &inst.config).unwrap();
    let stats = cluster.snapshot_stats().since(&before);
    let grad: Vec<f64> = (0..inst.m)
        .flat_map(|i| layout.gradient_block(i).as_slice().to_vec())
        .collect();
    (step, DenseVec::from_vec(grad), stats)
}

pub fn norm(v: &DenseVec) -> f64 {
    norm2(v)
}
