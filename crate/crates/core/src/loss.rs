//! Per-sample losses and the regularized empirical objective
//!
//! ```text
//! f(w) = (1/n) Σᵢ φ(wᵀxᵢ, yᵢ) + (λ/2)‖w‖²
//! ```
//!
//! Each loss is described by three scalars of the margin `t = wᵀxᵢ`: the
//! value, the gradient coefficient `g` with `∇φ = g·xᵢ` and the Hessian
//! coefficient `h` with `∇²φ = h·xᵢxᵢᵀ`. Everything else (full gradient,
//! Hessian-vector products, both distributed layouts) is assembled from these.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, DiscoError, Result};
use crate::linalg::{DenseVec, SparseBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `(y - t)²`, without a 1/2 factor.
    #[default]
    Square,
    /// `log(1 + exp(-y t))`.
    Logistic,
}

/// A loss together with its self-concordance parameter.
///
/// The parameter is descriptive metadata; no solver path reads it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub kind: LossKind,
    pub self_concordance: f64,
}

impl Loss {
    pub fn new(kind: LossKind) -> Self {
        let self_concordance = match kind {
            // Quadratic: third derivative vanishes.
            LossKind::Square => 0.0,
            // Unit-scaled logistic.
            LossKind::Logistic => 1.0,
        };
        Self {
            kind,
            self_concordance,
        }
    }

    pub fn with_self_concordance(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(DiscoError::Config(format!(
                "self-concordance parameter must be >= 0, got {m}"
            )));
        }
        self.self_concordance = m;
        Ok(self)
    }

    pub fn value(&self, margin: f64, label: f64) -> Result<f64> {
        check_margin(margin)?;
        Ok(match self.kind {
            LossKind::Square => (label - margin) * (label - margin),
            LossKind::Logistic => softplus(-label * margin),
        })
    }

    pub fn grad_coeff(&self, margin: f64, label: f64) -> Result<f64> {
        check_margin(margin)?;
        Ok(match self.kind {
            LossKind::Square => 2.0 * (margin - label),
            LossKind::Logistic => -label * sigmoid(-label * margin),
        })
    }

    pub fn hess_coeff(&self, margin: f64, label: f64) -> Result<f64> {
        check_margin(margin)?;
        Ok(match self.kind {
            LossKind::Square => 2.0,
            LossKind::Logistic => {
                let s = sigmoid(label * margin);
                // label² is 1 for ±1 labels; kept so h stays the exact
                // second derivative for arbitrary labels.
                label * label * s * (1.0 - s)
            }
        })
    }

    /// Whether the Hessian of the objective is independent of `w`.
    pub fn has_constant_hessian(&self) -> bool {
        self.kind == LossKind::Square
    }

    /// Gradient coefficients for every sample given its margin.
    pub fn grad_coeffs(&self, margins: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
        margins
            .iter()
            .zip(labels)
            .map(|(&t, &y)| self.grad_coeff(t, y))
            .collect()
    }

    pub fn hess_coeffs(&self, margins: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
        margins
            .iter()
            .zip(labels)
            .map(|(&t, &y)| self.hess_coeff(t, y))
            .collect()
    }
}

fn check_margin(margin: f64) -> Result<()> {
    if margin.is_finite() {
        Ok(())
    } else {
        Err(DiscoError::NonFinite {
            context: "loss margin",
            value: margin,
        })
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The regularized objective over a `d × n` feature-major data matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: Loss,
    pub lambda: f64,
    pub n: usize,
    pub d: usize,
}

impl Objective {
    pub fn new(loss: Loss, lambda: f64, n: usize, d: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(DiscoError::Config(format!("lambda must be > 0, got {lambda}")));
        }
        if n == 0 || d == 0 {
            return Err(DiscoError::Config(format!(
                "objective needs n >= 1 and d >= 1 (got n = {n}, d = {d})"
            )));
        }
        Ok(Self { loss, lambda, n, d })
    }

    fn check_data(&self, x: &SparseBlock, y: &DenseVec) -> Result<()> {
        check_len("objective rows (d)", self.d, x.rows())?;
        check_len("objective cols (n)", self.n, x.cols())?;
        check_len("objective labels (n)", self.n, y.len())
    }

    pub fn value(&self, x: &SparseBlock, y: &DenseVec, w: &DenseVec) -> Result<f64> {
        self.check_data(x, y)?;
        let margins = crate::linalg::spmv_transpose(x, w)?;
        let mut acc = 0.0;
        for (&t, &yi) in margins.iter().zip(y.iter()) {
            acc += self.loss.value(t, yi)?;
        }
        let reg = 0.5 * self.lambda * crate::linalg::dot(w, w)?;
        Ok(acc / self.n as f64 + reg)
    }

    /// `∇f(w) = (1/n) Σᵢ gᵢ xᵢ + λ w`.
    pub fn full_gradient(&self, x: &SparseBlock, y: &DenseVec, w: &DenseVec) -> Result<DenseVec> {
        self.check_data(x, y)?;
        let margins = crate::linalg::spmv_transpose(x, w)?;
        let coeffs = DenseVec::from_vec(self.loss.grad_coeffs(&margins, y)?);
        let sum = crate::linalg::spmv(x, &coeffs)?;
        Ok(self.finish(&sum, w))
    }

    /// `H u = (1/n) Σᵢ hᵢ xᵢ (xᵢᵀ u) + λ u`, with `hᵢ` taken at `w`.
    pub fn hess_vec_dense(
        &self,
        x: &SparseBlock,
        y: &DenseVec,
        w: &DenseVec,
        u: &DenseVec,
    ) -> Result<DenseVec> {
        self.check_data(x, y)?;
        check_len("hess_vec_dense (u)", self.d, u.len())?;
        let margins = crate::linalg::spmv_transpose(x, w)?;
        let h = self.loss.hess_coeffs(&margins, y)?;
        let mut z = crate::linalg::spmv_transpose(x, u)?;
        for (zi, hi) in z.iter_mut().zip(&h) {
            *zi *= hi;
        }
        let sum = crate::linalg::spmv(x, &z)?;
        Ok(self.finish(&sum, u))
    }

    /// Turns a raw data sum `Σᵢ cᵢ xᵢ` into `(1/n)·sum + λ·v`.
    ///
    /// Every layout funnels through here so that identical sums give
    /// bit-identical results.
    pub fn finish(&self, sum: &[f64], v: &[f64]) -> DenseVec {
        let inv_n = 1.0 / self.n as f64;
        sum.iter()
            .zip(v)
            .map(|(s, vi)| s * inv_n + self.lambda * vi)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQ: Loss = Loss {
        kind: LossKind::Square,
        self_concordance: 0.0,
    };
    const LOG: Loss = Loss {
        kind: LossKind::Logistic,
        self_concordance: 1.0,
    };

    #[test]
    fn loss_values() {
        assert_eq!(SQ.value(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(SQ.value(0.0, 2.0).unwrap(), 4.0);
        assert!((LOG.value(0.0, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // Large margins neither overflow nor lose the linear tail.
        assert!((LOG.value(-800.0, 1.0).unwrap() - 800.0).abs() < 1e-12);
        assert!(LOG.value(800.0, 1.0).unwrap() >= 0.0);
    }

    #[test]
    fn grad_coefficients() {
        assert_eq!(SQ.grad_coeff(0.0, 1.0).unwrap(), -2.0);
        assert_eq!(SQ.grad_coeff(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(LOG.grad_coeff(0.0, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn hess_coefficients() {
        for t in [-3.0, 0.0, 12.5] {
            assert_eq!(SQ.hess_coeff(t, 1.0).unwrap(), 2.0);
        }
        assert_eq!(LOG.hess_coeff(0.0, 1.0).unwrap(), 0.25);
        assert!(LOG.hess_coeff(50.0, 1.0).unwrap() < 1e-20);
        assert!(LOG.hess_coeff(-50.0, 1.0).unwrap() < 1e-20);
    }

    #[test]
    fn non_finite_margin_is_fatal() {
        assert!(SQ.value(f64::NAN, 1.0).is_err());
        assert!(LOG.grad_coeff(f64::INFINITY, 1.0).is_err());
        assert!(LOG.hess_coeff(f64::NEG_INFINITY, 1.0).is_err());
    }

    #[test]
    fn objective_rejects_nonpositive_lambda() {
        assert!(Objective::new(SQ, 0.0, 1, 1).is_err());
        assert!(Objective::new(SQ, 1.0, 0, 1).is_err());
        assert!(Loss::new(LossKind::Logistic).with_self_concordance(-1.0).is_err());
    }

    #[test]
    fn single_sample_gradient_by_hand() {
        // The regularizer needs λ > 0 to construct, but at w = 0 it contributes nothing.
        let x = SparseBlock::from_dense(2, 1, &[1.0, 0.0]).unwrap();
        let y = DenseVec::from_vec(vec![1.0]);
        let obj = Objective::new(SQ, 1e-3, 1, 2).unwrap();
        let g = obj.full_gradient(&x, &y, &DenseVec::zeros(2)).unwrap();
        assert_eq!(g.as_slice(), &[-2.0, 0.0]);
    }

    #[test]
    fn regularizer_only_gradient() {
        // All-zero data: every loss coefficient multiplies a zero column.
        let x = SparseBlock::from_dense(3, 2, &[0.0; 6]).unwrap();
        let y = DenseVec::from_vec(vec![1.0, -1.0]);
        let obj = Objective::new(SQ, 1e3, 2, 3).unwrap();
        let w = DenseVec::from_vec(vec![0.5, -2.0, 3.0]);
        let g = obj.full_gradient(&x, &y, &w).unwrap();
        for (gi, wi) in g.iter().zip(w.iter()) {
            assert_eq!(*gi, 1e3 * wi);
        }
    }

    #[test]
    fn identity_data_hessian_is_2i() {
        let x = SparseBlock::identity(2);
        let y = DenseVec::from_vec(vec![1.0, 1.0]);
        let obj = Objective::new(SQ, 1.0, 2, 2).unwrap();
        let u = DenseVec::from_vec(vec![0.3, -1.7]);
        let hu = obj.hess_vec_dense(&x, &y, &DenseVec::zeros(2), &u).unwrap();
        assert_eq!(hu.as_slice(), &[0.6, -3.4]);
        let zero = obj
            .hess_vec_dense(&x, &y, &DenseVec::zeros(2), &DenseVec::zeros(2))
            .unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);
    }

    /// Dense-assembly oracle: H = (1/n) Σ hᵢ xᵢxᵢᵀ + λI built entry by entry.
    fn dense_hessian(obj: &Objective, x: &[f64], y: &[f64], w: &[f64]) -> Vec<f64> {
        let (d, n) = (obj.d, obj.n);
        let mut h = vec![0.0; d * d];
        for i in 0..n {
            let t: f64 = (0..d).map(|a| x[a * n + i] * w[a]).sum();
            let hi = obj.loss.hess_coeff(t, y[i]).unwrap();
            for a in 0..d {
                for b in 0..d {
                    h[a * d + b] += hi * x[a * n + i] * x[b * n + i] / n as f64;
                }
            }
        }
        for a in 0..d {
            h[a * d + a] += obj.lambda;
        }
        h
    }

    fn random_problem(rng: &mut ChaCha8Rng, d: usize, n: usize, kind: LossKind) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..d * n)
            .map(|_| if rng.gen_bool(0.6) { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| match kind {
                LossKind::Square => rng.gen_range(-2.0..2.0),
                LossKind::Logistic => if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            })
            .collect();
        (x, y)
    }

    #[test]
    fn hess_vec_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [LossKind::Square, LossKind::Logistic] {
            let (d, n) = (6, 10);
            let (xd, yd) = random_problem(&mut rng, d, n, kind);
            let obj = Objective::new(Loss::new(kind), 0.05, n, d).unwrap();
            let x = SparseBlock::from_dense(d, n, &xd).unwrap();
            let y = DenseVec::from_vec(yd.clone());
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = dense_hessian(&obj, &xd, &yd, &w);
            let got = obj
                .hess_vec_dense(&x, &y, &DenseVec::from_vec(w), &DenseVec::from_vec(u.clone()))
                .unwrap();
            for a in 0..d {
                let want: f64 = (0..d).map(|b| h[a * d + b] * u[b]).sum();
                assert!((got[a] - want).abs() < 1e-10, "{kind:?} row {a}");
            }
        }
    }

    #[test]
    fn square_hessian_is_independent_of_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, n) = (5, 9);
        let (xd, yd) = random_problem(&mut rng, d, n, LossKind::Square);
        let obj = Objective::new(SQ, 0.1, n, d).unwrap();
        let x = SparseBlock::from_dense(d, n, &xd).unwrap();
        let y = DenseVec::from_vec(yd);
        let u: DenseVec = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w1: DenseVec = (0..d).map(|_| rng.gen_range(-9.0..9.0)).collect();
        let w2 = DenseVec::zeros(d);
        let a = obj.hess_vec_dense(&x, &y, &w1, &u).unwrap();
        let b = obj.hess_vec_dense(&x, &y, &w2, &u).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
