use std::ops::{Deref, DerefMut};

use crate::error::{check_len, DiscoError, Result};

/// A dense `f64` vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVec {
    values: Vec<f64>,
}

impl DenseVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Like [`DenseVec::from_vec`], but rejects NaN and infinite entries.
    pub fn try_from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DiscoError::NonFinite {
                context: "DenseVec",
                value: bad,
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// `self += alpha * x`, in place.
    pub fn add_scaled(&mut self, alpha: f64, x: &DenseVec) -> Result<()> {
        check_len("add_scaled", self.len(), x.len())?;
        for (yi, xi) in self.values.iter_mut().zip(&x.values) {
            *yi += alpha * xi;
        }
        Ok(())
    }
}

impl Deref for DenseVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for DenseVec {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl From<Vec<f64>> for DenseVec {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl FromIterator<f64> for DenseVec {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &DenseVec, y: &DenseVec) -> Result<DenseVec> {
    let mut out = y.clone();
    out.add_scaled(alpha, x)?;
    Ok(out)
}

/// Inner product accumulated strictly left to right.
pub fn dot(x: &DenseVec, y: &DenseVec) -> Result<f64> {
    check_len("dot", x.len(), y.len())?;
    Ok(dot_slices(x, y))
}

pub fn norm2(x: &DenseVec) -> f64 {
    dot_slices(x, x).sqrt()
}

pub(crate) fn dot_slices(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

/// A length-`total_len` vector stored as contiguous per-node blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedVec {
    blocks: Vec<DenseVec>,
    block_offsets: Vec<usize>,
    total_len: usize,
}

impl PartitionedVec {
    pub fn from_blocks(blocks: Vec<DenseVec>) -> Self {
        let mut block_offsets = Vec::with_capacity(blocks.len());
        let mut total_len = 0;
        for b in &blocks {
            block_offsets.push(total_len);
            total_len += b.len();
        }
        Self {
            blocks,
            block_offsets,
            total_len,
        }
    }

    /// Splits `full` into blocks of the given sizes.
    pub fn split(full: &DenseVec, sizes: &[usize]) -> Result<Self> {
        check_len("PartitionedVec::split", full.len(), sizes.iter().sum())?;
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&len| {
                let b = DenseVec::from_vec(full[start..start + len].to_vec());
                start += len;
                b
            })
            .collect();
        Ok(Self::from_blocks(blocks))
    }

    pub fn blocks(&self) -> &[DenseVec] {
        &self.blocks
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offsets
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn concat(&self) -> DenseVec {
        let mut out = Vec::with_capacity(self.total_len);
        for b in &self.blocks {
            out.extend_from_slice(b);
        }
        DenseVec::from_vec(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axpy_with_zero_scalar_returns_y() {
        let x = DenseVec::from_vec(vec![1.0, -7.0]);
        let y = DenseVec::from_vec(vec![3.0, 4.0]);
        assert_eq!(axpy(0.0, &x, &y).unwrap(), y);
    }

    #[test]
    fn dot_and_norm_by_hand() {
        let x = DenseVec::from_vec(vec![1.0, 2.0]);
        let y = DenseVec::from_vec(vec![3.0, 4.0]);
        assert_eq!(dot(&x, &y).unwrap(), 11.0);
        assert_eq!(norm2(&y), 5.0);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let x = DenseVec::zeros(2);
        let y = DenseVec::zeros(3);
        let err = dot(&x, &y).unwrap_err();
        assert!(matches!(
            err,
            DiscoError::DimensionMismatch {
                expected: 2,
                actual: 3,
                ..
            }
        ));
        assert!(axpy(1.0, &x, &y).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(DenseVec::try_from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVec::try_from_vec(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn partitioned_offsets_and_concat() {
        let full = DenseVec::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = PartitionedVec::split(&full, &[2, 1, 2]).unwrap();
        assert_eq!(p.block_offsets(), &[0, 2, 3]);
        assert_eq!(p.total_len(), 5);
        assert_eq!(p.concat(), full);
        assert!(PartitionedVec::split(&full, &[2, 2]).is_err());
    }
}
