//! The subsampled preconditioner
//!
//! ```text
//! P = (1/τ) Σ_{j<τ} hⱼ aⱼ aⱼᵀ + μ I
//! ```
//!
//! where `aⱼ` are the first `τ` samples of the master shard and `hⱼ` their
//! loss curvature at the current iterate. When `τ >= dim` (or `μ = 0`) `P` is
//! assembled densely and Cholesky-factored. Otherwise `P` is a rank-`τ`
//! update of `μI` and is inverted through the `τ × τ` capacitance matrix
//!
//! ```text
//! P⁻¹ r = (r − A y) / μ,   y = D½ (μI + D½ AᵀA D½ / τ)⁻¹ D½ Aᵀr / τ.
//! ```

use crate::comm::Cluster;
use crate::error::{check_len, DiscoError, Result};
use crate::linalg::{dot_slices, Cholesky, DenseVec, SparseBlock};
use crate::partition::FeaturePartition;

fn pd_error(err: DiscoError, mu: f64) -> DiscoError {
    match err {
        DiscoError::NotPositiveDefinite { row, pivot } => {
            DiscoError::PreconditionerNotPd { row, pivot, mu }
        }
        other => other,
    }
}

/// Factor of the `τ × τ` capacitance matrix `μI + D½ G D½ / τ`, with
/// `G = AᵀA`.
#[derive(Debug, Clone)]
pub struct Capacitance {
    tau: usize,
    sqrt_h: Vec<f64>,
    chol: Cholesky,
}

impl Capacitance {
    /// `gram` is `AᵀA` (row-major, `τ × τ`), `h` the sample curvatures.
    pub fn new(gram: &[f64], h: &[f64], mu: f64) -> Result<Self> {
        let tau = h.len();
        check_len("Capacitance (gram)", tau * tau, gram.len())?;
        if !(mu > 0.0) {
            return Err(DiscoError::PreconditionerNotPd {
                row: 0,
                pivot: mu,
                mu,
            });
        }
        let sqrt_h: Vec<f64> = h.iter().map(|v| v.max(0.0).sqrt()).collect();
        let inv_tau = 1.0 / tau as f64;
        let mut c = vec![0.0; tau * tau];
        for j in 0..tau {
            for k in 0..tau {
                c[j * tau + k] = sqrt_h[j] * gram[j * tau + k] * sqrt_h[k] * inv_tau;
            }
            c[j * tau + j] += mu;
        }
        let chol = Cholesky::factor(c, tau).map_err(|e| pd_error(e, mu))?;
        Ok(Self { tau, sqrt_h, chol })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Maps `Aᵀr` to the coefficients `y` with `P⁻¹ r = (r − A y) / μ`.
    pub fn coefficients(&self, at_r: &[f64]) -> Result<Vec<f64>> {
        check_len("Capacitance::coefficients", self.tau, at_r.len())?;
        let inv_tau = 1.0 / self.tau as f64;
        let rhs: Vec<f64> = at_r.iter().zip(&self.sqrt_h).map(|(a, s)| a * s).collect();
        let mut y = self.chol.solve(&rhs)?;
        for (yj, s) in y.iter_mut().zip(&self.sqrt_h) {
            *yj *= s * inv_tau;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(Cholesky),
    LowRank {
        samples: SparseBlock,
        capacitance: Capacitance,
    },
}

/// A factored preconditioner acting on vectors of length `dim`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    dim: usize,
    mu: f64,
    factor: Factor,
}

impl Preconditioner {
    /// Builds `P` from `samples` (`τ × dim`, one row per sample) and their
    /// curvature coefficients `h`.
    pub fn build(samples: &SparseBlock, h: &[f64], mu: f64) -> Result<Self> {
        let tau = samples.rows();
        let dim = samples.cols();
        check_len("Preconditioner::build (h)", tau, h.len())?;
        if tau == 0 {
            return Err(DiscoError::Config("preconditioner needs tau >= 1".into()));
        }
        let factor = if mu == 0.0 || tau >= dim {
            let dense = assemble_dense(samples, h, mu);
            Factor::Dense(Cholesky::factor(dense, dim).map_err(|e| pd_error(e, mu))?)
        } else {
            let gram = sample_gram(samples);
            Factor::LowRank {
                samples: samples.clone(),
                capacitance: Capacitance::new(&gram, h, mu)?,
            }
        };
        Ok(Self { dim, mu, factor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_low_rank(&self) -> bool {
        matches!(self.factor, Factor::LowRank { .. })
    }

    /// Solves `P s = r`.
    pub fn apply(&self, r: &DenseVec) -> Result<DenseVec> {
        check_len("apply_Pinv", self.dim, r.len())?;
        match &self.factor {
            Factor::Dense(chol) => Ok(DenseVec::from_vec(chol.solve(r)?)),
            Factor::LowRank {
                samples,
                capacitance,
            } => {
                let mut at_r = DenseVec::zeros(samples.rows());
                samples.mul_into(r, &mut at_r);
                let y = capacitance.coefficients(&at_r)?;
                let mut ay = DenseVec::zeros(self.dim);
                samples.mul_transpose_into(&y, &mut ay);
                Ok(low_rank_finish(r, &ay, self.mu))
            }
        }
    }
}

/// `(r − A y) / μ`.
pub(crate) fn low_rank_finish(r: &[f64], ay: &[f64], mu: f64) -> DenseVec {
    let inv_mu = 1.0 / mu;
    r.iter().zip(ay).map(|(ri, ai)| (ri - ai) * inv_mu).collect()
}

/// Dense `(1/τ) Σ hⱼ aⱼaⱼᵀ + μI`, row-major.
pub fn assemble_dense(samples: &SparseBlock, h: &[f64], mu: f64) -> Vec<f64> {
    let dim = samples.cols();
    let inv_tau = 1.0 / samples.rows() as f64;
    let mut p = vec![0.0; dim * dim];
    for (j, &hj) in h.iter().enumerate() {
        let (idx, vals) = samples.row(j);
        let w = hj * inv_tau;
        for (&a, &va) in idx.iter().zip(vals) {
            let row = &mut p[a * dim..(a + 1) * dim];
            for (&b, &vb) in idx.iter().zip(vals) {
                row[b] += w * va * vb;
            }
        }
    }
    for a in 0..dim {
        p[a * dim + a] += mu;
    }
    p
}

/// `AᵀA` for the sample rows of `samples` (`τ × τ`, row-major).
fn sample_gram(samples: &SparseBlock) -> Vec<f64> {
    let tau = samples.rows();
    let mut g = vec![0.0; tau * tau];
    for j in 0..tau {
        for k in 0..=j {
            let v = sparse_row_dot(samples.row(j), samples.row(k));
            g[j * tau + k] = v;
            g[k * tau + j] = v;
        }
    }
    g
}

fn sparse_row_dot(a: (&[usize], &[f64]), b: (&[usize], &[f64])) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.0.len() && j < b.0.len() {
        match a.0[i].cmp(&b.0[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a.1[i] * b.1[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// The sample-layout preconditioner reproduced exactly on a feature layout.
///
/// Node `i` keeps its slice `Aᵢ` (`dᵢ × τ`) of the preconditioner samples.
/// A one-off setup reduction gives every node the cross Gram matrix
/// `K = AᵀX` (`τ × n`). From then on `Aᵀr` is a replicated `τ`-vector that
/// each PCG step updates from the replicated margin products alone, since
/// `Aᵀ(Hu) = (1/n) K (h ⊙ Xᵀu) + λ (Xᵀu)[..τ]`.
#[derive(Debug, Clone)]
pub struct FeatureSketch {
    tau: usize,
    n: usize,
    mu: f64,
    cross_gram: Vec<f64>,
    slices: Vec<SparseBlock>,
    capacitance: Option<Capacitance>,
}

impl FeatureSketch {
    /// Performs the setup reduction of `AᵀX` (metered as setup traffic).
    pub fn setup(cluster: &mut Cluster, partition: &FeaturePartition, tau: usize, mu: f64) -> Result<Self> {
        let n = partition.n;
        if tau == 0 || tau > n {
            return Err(DiscoError::Config(format!("tau must lie in [1, {n}], got {tau}")));
        }
        let slices: Vec<SparseBlock> = partition
            .shards
            .iter()
            .map(|s| s.x.select_cols(0..tau))
            .collect();
        let partials = cluster.run(|i| {
            let x = &partition.shards[i].x;
            let mut k = vec![0.0; tau * n];
            for r in 0..x.rows() {
                let (idx, vals) = x.row(r);
                let head = idx.partition_point(|&c| c < tau);
                for (&j, &aj) in idx[..head].iter().zip(&vals[..head]) {
                    let row = &mut k[j * n..(j + 1) * n];
                    for (&c, &v) in idx.iter().zip(vals) {
                        row[c] += aj * v;
                    }
                }
            }
            k
        });
        // Summed in node order, like any reduce-all.
        let mut cross_gram = vec![0.0; tau * n];
        for p in partials {
            for (acc, v) in cross_gram.iter_mut().zip(&p) {
                *acc += v;
            }
        }
        cluster.record_setup(tau * n);
        Ok(Self {
            tau,
            n,
            mu,
            cross_gram,
            slices,
            capacitance: None,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn is_ready(&self) -> bool {
        self.capacitance.is_some()
    }

    /// Re-factors the capacitance for new curvatures `h` of the first `τ` samples.
    pub fn refresh(&mut self, h: &[f64]) -> Result<()> {
        check_len("FeatureSketch::refresh", self.tau, h.len())?;
        let (tau, n) = (self.tau, self.n);
        let mut gram = vec![0.0; tau * tau];
        for j in 0..tau {
            gram[j * tau..(j + 1) * tau].copy_from_slice(&self.cross_gram[j * n..j * n + tau]);
        }
        self.capacitance = Some(Capacitance::new(&gram, h, self.mu)?);
        Ok(())
    }

    fn capacitance(&self) -> &Capacitance {
        self.capacitance
            .as_ref()
            .expect("FeatureSketch::refresh must run before use")
    }

    /// `Aᵀ v` given a replicated data-space sum `s` (length `n`) and the
    /// margin part `t` (length `n`): `(1/n) K s + λ t[..τ]`.
    pub(crate) fn project(&self, sum: &[f64], margins: &[f64], lambda: f64) -> Vec<f64> {
        let inv_n = 1.0 / self.n as f64;
        (0..self.tau)
            .map(|j| {
                let row = &self.cross_gram[j * self.n..(j + 1) * self.n];
                dot_slices(row, sum) * inv_n + lambda * margins[j]
            })
            .collect()
    }

    pub(crate) fn coefficients(&self, at_r: &[f64]) -> Result<Vec<f64>> {
        self.capacitance().coefficients(at_r)
    }

    /// Node-local block of `P⁻¹ r`: `(rᵢ − Aᵢ y) / μ`.
    pub(crate) fn apply_block(&self, node: usize, r: &[f64], y: &[f64]) -> DenseVec {
        let slice = &self.slices[node];
        let mut ay = vec![0.0; slice.rows()];
        slice.mul_into(y, &mut ay);
        low_rank_finish(r, &ay, self.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(rng: &mut ChaCha8Rng, tau: usize, dim: usize) -> (SparseBlock, Vec<f64>) {
        let dense: Vec<f64> = (0..tau * dim)
            .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        (SparseBlock::from_dense(tau, dim, &dense).unwrap(), dense)
    }

    fn matvec(p: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| p[i * n + j] * x[j]).sum()).collect()
    }

    /// Brute-force oracle: P from explicit outer products.
    fn brute_force_p(dense: &[f64], tau: usize, dim: usize, h: &[f64], mu: f64) -> Vec<f64> {
        let mut p = vec![0.0; dim * dim];
        for j in 0..tau {
            for a in 0..dim {
                for b in 0..dim {
                    p[a * dim + b] += h[j] * dense[j * dim + a] * dense[j * dim + b] / tau as f64;
                }
            }
        }
        for a in 0..dim {
            p[a * dim + a] += mu;
        }
        p
    }

    #[test]
    fn dense_assembly_matches_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (samples, dense) = random_samples(&mut rng, 4, 8);
        let h = vec![2.0; 4];
        let p = assemble_dense(&samples, &h, 0.01);
        let oracle = brute_force_p(&dense, 4, 8, &h, 0.01);
        for (a, b) in p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_and_scaled_identity() {
        // One unit sample in 1-D with h = 0: P = μ.
        let s = SparseBlock::identity(1);
        let p = Preconditioner::build(&s, &[0.0], 2.0).unwrap();
        assert!((p.apply(&DenseVec::from_vec(vec![4.0])).unwrap()[0] - 2.0).abs() <= 4.0 * f64::EPSILON);
        let p = Preconditioner::build(&s, &[1.0], 0.0).unwrap();
        assert_eq!(p.apply(&DenseVec::from_vec(vec![4.0])).unwrap().as_slice(), &[4.0]);
    }

    #[test]
    fn both_factorizations_invert_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (tau, dim) in [(6, 6), (10, 6), (3, 6), (4, 8)] {
            let (samples, dense) = random_samples(&mut rng, tau, dim);
            let h: Vec<f64> = (0..tau).map(|_| rng.gen_range(0.1..2.0)).collect();
            let mu = 0.3;
            let p = Preconditioner::build(&samples, &h, mu).unwrap();
            assert_eq!(p.is_low_rank(), tau < dim);
            let r: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = p.apply(&DenseVec::from_vec(r.clone())).unwrap();
            let back = matvec(&brute_force_p(&dense, tau, dim, &h, mu), &s);
            for (a, b) in back.iter().zip(&r) {
                assert!((a - b).abs() < 1e-10, "tau={tau} dim={dim}");
            }
        }
    }

    #[test]
    fn large_shift_approaches_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (samples, _) = random_samples(&mut rng, 3, 5);
        let mu = 1e8;
        let p = Preconditioner::build(&samples, &[1.0; 3], mu).unwrap();
        let r = DenseVec::from_vec(vec![1.0, -2.0, 3.0, 0.5, 7.0]);
        let s = p.apply(&r).unwrap();
        for (si, ri) in s.iter().zip(r.iter()) {
            assert!((si - ri / mu).abs() <= 1e-7 * (ri / mu).abs().max(1e-12));
        }
    }

    #[test]
    fn singular_without_shift_names_mu() {
        // Two samples in 4-D: rank 2, so μ = 0 leaves P singular.
        let samples = SparseBlock::from_dense(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let err = Preconditioner::build(&samples, &[1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, DiscoError::PreconditionerNotPd { .. }));
        assert!(err.to_string().contains("mu"));
    }

    #[test]
    fn apply_checks_length() {
        let p = Preconditioner::build(&SparseBlock::identity(2), &[1.0, 1.0], 0.0).unwrap();
        assert!(p.apply(&DenseVec::zeros(3)).is_err());
    }
}
