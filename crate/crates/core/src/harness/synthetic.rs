use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::Dataset;
use crate::error::{DiscoError, Result};
use crate::linalg::{spmv_transpose, DenseVec, SparseBlock};

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// The planted model used to generate the labels.
    pub w_star: DenseVec,
}

/// Random sparse regression problem: each entry of `X` (d × n) is present
/// with probability `density` and drawn from N(0, 1); `w* ~ N(0, 1/(d·density))`
/// so margins have roughly unit variance; `y = Xᵀw* + noise · N(0, 1)`.
pub fn gen_synthetic(d: usize, n: usize, density: f64, noise: f64, seed: u64) -> Result<SyntheticData> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(DiscoError::Config(format!("density must be in (0, 1], got {density}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DiscoError::Config(format!("noise must be >= 0, got {noise}")));
    }
    if d == 0 || n == 0 {
        return Err(DiscoError::Config(format!("empty synthetic problem ({d} x {n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut triplets = Vec::new();
    for i in 0..d {
        for j in 0..n {
            if density >= 1.0 || rng.gen::<f64>() < density {
                let v: f64 = StandardNormal.sample(&mut rng);
                triplets.push((i, j, v));
            }
        }
    }
    let x = SparseBlock::from_triplets(d, n, &triplets)?;

    let w_dist = Normal::new(0.0, (1.0 / (d as f64 * density)).sqrt()).expect("positive std");
    let w_star: DenseVec = (0..d).map(|_| w_dist.sample(&mut rng)).collect();
    let mut y = spmv_transpose(&x, &w_star)?;
    if noise > 0.0 {
        for yi in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *yi += noise * e;
        }
    }
    let source = format!("synthetic(d={d}, n={n}, density={density}, noise={noise}, seed={seed})");
    Ok(SyntheticData {
        dataset: Dataset::new(x, y, source)?,
        w_star,
    })
}
