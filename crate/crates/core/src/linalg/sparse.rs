use std::ops::Range;

use crate::error::{check_len, DiscoError, Result};

use super::DenseVec;

/// A compressed-sparse-row block of the data matrix.
///
/// `global_row_offset` / `global_col_offset` locate the block inside the full
/// matrix it was cut from; they are bookkeeping only and never enter the
/// arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    global_row_offset: usize,
    global_col_offset: usize,
}

impl SparseBlock {
    /// Builds a block from raw CSR arrays, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(DiscoError::InvalidSparse(format!(
                "row_ptr has {} entries, expected {}",
                row_ptr.len(),
                rows + 1
            )));
        }
        if col_idx.len() != values.len() || row_ptr[0] != 0 || row_ptr[rows] != values.len() {
            return Err(DiscoError::InvalidSparse(
                "row_ptr, col_idx and values disagree on nnz".into(),
            ));
        }
        for r in 0..rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(DiscoError::InvalidSparse(format!("row_ptr decreases at row {r}")));
            }
            let idx = &col_idx[lo..hi];
            if idx.iter().any(|&c| c >= cols) {
                return Err(DiscoError::InvalidSparse(format!(
                    "row {r} has a column index >= {cols}"
                )));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DiscoError::InvalidSparse(format!(
                    "row {r} is not strictly sorted by column"
                )));
            }
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DiscoError::NonFinite {
                context: "SparseBlock",
                value: bad,
            });
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            global_row_offset: 0,
            global_col_offset: 0,
        })
    }

    /// Builds a block from `(row, col, value)` triplets in any order.
    /// Explicit zeros are dropped; duplicate coordinates are an error.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<_> = triplets.iter().copied().filter(|t| t.2 != 0.0).collect();
        sorted.sort_by_key(|t| (t.0, t.1));
        if let Some(w) = sorted.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(DiscoError::InvalidSparse(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0; rows + 1];
        for &(r, _, _) in &sorted {
            if r >= rows {
                return Err(DiscoError::InvalidSparse(format!("row {r} >= {rows}")));
            }
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Self::from_csr(rows, cols, row_ptr, col_idx, values)
    }

    /// Builds a block from a row-major dense array, keeping the nonzeros.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_len("SparseBlock::from_dense", rows * cols, data.len())?;
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..rows {
            for c in 0..cols {
                let v = data[r * cols + c];
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self::from_csr(rows, cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            global_row_offset: 0,
            global_col_offset: 0,
        }
    }

    pub fn with_offsets(mut self, global_row_offset: usize, global_col_offset: usize) -> Self {
        self.global_row_offset = global_row_offset;
        self.global_col_offset = global_col_offset;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn global_row_offset(&self) -> usize {
        self.global_row_offset
    }

    pub fn global_col_offset(&self) -> usize {
        self.global_col_offset
    }

    /// Column indices and values of row `r`, sorted by column.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }

    /// Returns the transposed block; offsets swap along with the axes.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                let slot = next[c];
                col_idx[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
            global_row_offset: self.global_col_offset,
            global_col_offset: self.global_row_offset,
        }
    }

    /// Rows `range` as a new block, recording the row offset.
    pub fn select_rows(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows, "row range out of bounds");
        let lo = self.row_ptr[range.start];
        let hi = self.row_ptr[range.end];
        Self {
            rows: range.len(),
            cols: self.cols,
            row_ptr: self.row_ptr[range.start..=range.end]
                .iter()
                .map(|p| p - lo)
                .collect(),
            col_idx: self.col_idx[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
            global_row_offset: self.global_row_offset + range.start,
            global_col_offset: self.global_col_offset,
        }
    }

    /// Columns `range` as a new block, re-indexed from zero.
    pub fn select_cols(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols, "column range out of bounds");
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let start = idx.partition_point(|&c| c < range.start);
            let end = idx.partition_point(|&c| c < range.end);
            col_idx.extend(idx[start..end].iter().map(|c| c - range.start));
            values.extend_from_slice(&vals[start..end]);
            row_ptr.push(values.len());
        }
        Self {
            rows: self.rows,
            cols: range.len(),
            row_ptr,
            col_idx,
            values,
            global_row_offset: self.global_row_offset,
            global_col_offset: self.global_col_offset + range.start,
        }
    }

    /// Stacks blocks with equal column counts on top of each other.
    pub fn vstack(blocks: &[SparseBlock]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut rows = 0;
        for b in blocks {
            check_len("SparseBlock::vstack", cols, b.cols)?;
            for r in 0..b.rows {
                let (idx, vals) = b.row(r);
                col_idx.extend_from_slice(idx);
                values.extend_from_slice(vals);
                row_ptr.push(values.len());
            }
            rows += b.rows;
        }
        let offset = blocks.first().map_or((0, 0), |b| {
            (b.global_row_offset, b.global_col_offset)
        });
        Ok(Self::from_csr(rows, cols, row_ptr, col_idx, values)?.with_offsets(offset.0, offset.1))
    }

    /// `y = self · x` into a caller-provided buffer.
    pub(crate) fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let (idx, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in idx.iter().zip(vals) {
                acc += v * x[c];
            }
            *out = acc;
        }
    }

    /// `y = selfᵀ · x` into a caller-provided buffer.
    pub(crate) fn mul_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.fill(0.0);
        for (r, &xr) in x.iter().enumerate() {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
    }
}

/// Sparse matrix-vector product `block · x`.
pub fn spmv(block: &SparseBlock, x: &DenseVec) -> Result<DenseVec> {
    check_len("spmv", block.cols, x.len())?;
    let mut y = DenseVec::zeros(block.rows);
    block.mul_into(x, &mut y);
    Ok(y)
}

/// Transposed product `blockᵀ · x`.
pub fn spmv_transpose(block: &SparseBlock, x: &DenseVec) -> Result<DenseVec> {
    check_len("spmv_transpose", block.rows, x.len())?;
    let mut y = DenseVec::zeros(block.cols);
    block.mul_transpose_into(x, &mut y);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        (0..rows)
            .map(|r| (0..cols).map(|c| a[r * cols + c] * x[c]).sum())
            .collect()
    }

    fn dense_mul_t(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        (0..cols)
            .map(|c| (0..rows).map(|r| a[r * cols + c] * x[r]).sum())
            .collect()
    }

    fn random_3x4_with_5_nonzeros(seed: u64) -> (SparseBlock, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut slots: Vec<usize> = (0..12).collect();
        let mut dense = vec![0.0; 12];
        for _ in 0..5 {
            let k = rng.gen_range(0..slots.len());
            dense[slots.swap_remove(k)] = rng.gen_range(-2.0..2.0);
        }
        (SparseBlock::from_dense(3, 4, &dense).unwrap(), dense)
    }

    #[test]
    fn identity_products() {
        let id = SparseBlock::identity(2);
        let x = DenseVec::from_vec(vec![3.0, 5.0]);
        assert_eq!(spmv(&id, &x).unwrap(), x);
        assert_eq!(spmv_transpose(&id, &x).unwrap(), x);
    }

    #[test]
    fn diagonal_and_hand_cases() {
        let diag = SparseBlock::from_dense(2, 2, &[2.0, 0.0, 0.0, 4.0]).unwrap();
        let ones = DenseVec::from_vec(vec![1.0, 1.0]);
        assert_eq!(spmv(&diag, &ones).unwrap().as_slice(), &[2.0, 4.0]);

        let upper = SparseBlock::from_dense(2, 2, &[1.0, 2.0, 0.0, 3.0]).unwrap();
        assert_eq!(spmv_transpose(&upper, &ones).unwrap().as_slice(), &[1.0, 5.0]);
    }

    #[test]
    fn random_sparse_matches_dense_oracle() {
        for seed in 0..10 {
            let (block, dense) = random_3x4_with_5_nonzeros(seed);
            assert_eq!(block.nnz(), 5);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = spmv(&block, &DenseVec::from_vec(x.clone())).unwrap();
            for (a, b) in y.iter().zip(dense_mul(&dense, 3, 4, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
            let xt: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let yt = spmv_transpose(&block, &DenseVec::from_vec(xt.clone())).unwrap();
            for (a, b) in yt.iter().zip(dense_mul_t(&dense, 3, 4, &xt)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_reports_both_sizes() {
        let block = SparseBlock::identity(3);
        let err = spmv(&block, &DenseVec::zeros(2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'), "{msg}");
        assert!(spmv_transpose(&block, &DenseVec::zeros(4)).is_err());
    }

    #[test]
    fn structure_validation() {
        assert!(SparseBlock::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseBlock::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseBlock::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        let b = SparseBlock::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(b.to_dense(), vec![0.0, 2.0, 0.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn row_and_column_slices_round_trip() {
        let (block, _) = random_3x4_with_5_nonzeros(7);
        let top = block.select_rows(0..1);
        let bottom = block.select_rows(1..3);
        assert_eq!(bottom.global_row_offset(), 1);
        let back = SparseBlock::vstack(&[top, bottom]).unwrap();
        assert_eq!(back.to_dense(), block.to_dense());

        let left = block.select_cols(0..2).transpose();
        let right = block.select_cols(2..4).transpose();
        let back = SparseBlock::vstack(&[left, right]).unwrap().transpose();
        assert_eq!(back.to_dense(), block.to_dense());
        assert_eq!(block.transpose().transpose(), block);
    }

    fn arb_block() -> impl Strategy<Value = (SparseBlock, Vec<f64>, Vec<f64>)> {
        (1usize..8, 1usize..8).prop_flat_map(|(rows, cols)| {
            (
                proptest::collection::vec(
                    prop_oneof![Just(0.0), -5.0f64..5.0],
                    rows * cols,
                ),
                proptest::collection::vec(-5.0f64..5.0, cols),
                proptest::collection::vec(-5.0f64..5.0, rows),
            )
                .prop_map(move |(dense, u, v)| {
                    (SparseBlock::from_dense(rows, cols, &dense).unwrap(), u, v)
                })
        })
    }

    proptest! {
        #[test]
        fn adjoint_identity((block, u, v) in arb_block()) {
            let u = DenseVec::from_vec(u);
            let v = DenseVec::from_vec(v);
            let lhs = dot(&spmv(&block, &u).unwrap(), &v).unwrap();
            let rhs = dot(&u, &spmv_transpose(&block, &v).unwrap()).unwrap();
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn products_are_bit_reproducible((block, u, _v) in arb_block()) {
            let u = DenseVec::from_vec(u);
            let a = spmv(&block, &u).unwrap();
            let b = spmv(&block, &u).unwrap();
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }

        #[test]
        fn identity_round_trip(x in proptest::collection::vec(-1e3f64..1e3, 1..10)) {
            let id = SparseBlock::identity(x.len());
            let x = DenseVec::from_vec(x);
            let back = spmv_transpose(&id, &spmv(&id, &x).unwrap()).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
