use crate::error::{check_len, DiscoError, Result};

/// Dense lower-triangular Cholesky factor `A = L Lᵀ`, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors the symmetric matrix `a` (row-major, `dim × dim`). Only the
    /// lower triangle is read.
    pub fn factor(mut a: Vec<f64>, dim: usize) -> Result<Self> {
        check_len("Cholesky::factor", dim * dim, a.len())?;
        let n = dim;
        let mut row_j = vec![0.0; n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= a[j * n + k] * a[j * n + k];
            }
            if !(diag > 0.0 && diag.is_finite()) {
                return Err(DiscoError::NotPositiveDefinite { row: j, pivot: diag });
            }
            let ljj = diag.sqrt();
            a[j * n + j] = ljj;
            a[j * n + j + 1..(j + 1) * n].fill(0.0);
            row_j[..j].copy_from_slice(&a[j * n..j * n + j]);
            for i in (j + 1)..n {
                let row_i = &mut a[i * n..(i + 1) * n];
                let mut s = row_i[j];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / ljj;
            }
        }
        Ok(Self { dim, lower: a })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("Cholesky::solve", self.dim, b.len())?;
        let n = self.dim;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let mut s = y[i];
            for (k, lik) in row.iter().enumerate() {
                s -= lik * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        Ok(y)
    }
}
