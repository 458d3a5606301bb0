//! Contiguous balanced splits of the `d × n` data matrix across `m` nodes.
//!
//! A sample partition cuts `X` by columns; each shard is stored transposed
//! (`n_j × d`, one CSR row per sample) so that per-sample margins are row
//! dot products. A feature partition cuts `X` by rows; each shard keeps its
//! `d_i × n` slice as is and receives a copy of the full label vector.

use crate::error::{check_len, DiscoError, Result};
use crate::linalg::{DenseVec, SparseBlock};

/// Sizes of a contiguous balanced split: the first `len % m` parts get one
/// extra element.
pub fn balanced_sizes(len: usize, m: usize) -> Vec<usize> {
    let base = len / m;
    let extra = len % m;
    (0..m).map(|i| base + usize::from(i < extra)).collect()
}

fn offsets_of(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SampleShard {
    /// Transposed block: row `i` is sample `sample_offset + i`, columns are features.
    pub xt: SparseBlock,
    pub labels: DenseVec,
}

impl SampleShard {
    pub fn samples(&self) -> usize {
        self.xt.rows()
    }

    pub fn sample_offset(&self) -> usize {
        self.xt.global_row_offset()
    }
}

#[derive(Debug, Clone)]
pub struct SamplePartition {
    pub shards: Vec<SampleShard>,
    pub d: usize,
    pub n: usize,
}

impl SamplePartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(SampleShard::samples).collect()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.shards.iter().map(SampleShard::sample_offset).collect()
    }

    /// Reassembles the feature-major `d × n` matrix and label vector.
    pub fn reassemble(&self) -> Result<(SparseBlock, DenseVec)> {
        let blocks: Vec<_> = self.shards.iter().map(|s| s.xt.clone()).collect();
        let x = SparseBlock::vstack(&blocks)?.transpose();
        let y = self.shards.iter().flat_map(|s| s.labels.iter().copied()).collect();
        Ok((x, y))
    }
}

#[derive(Debug, Clone)]
pub struct FeatureShard {
    /// `d_i × n` slice; `global_row_offset` is the first owned feature.
    pub x: SparseBlock,
    /// Node-local copy of all `n` labels.
    pub labels: DenseVec,
}

impl FeatureShard {
    pub fn features(&self) -> usize {
        self.x.rows()
    }

    pub fn feature_offset(&self) -> usize {
        self.x.global_row_offset()
    }
}

#[derive(Debug, Clone)]
pub struct FeaturePartition {
    pub shards: Vec<FeatureShard>,
    pub d: usize,
    pub n: usize,
}

impl FeaturePartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(FeatureShard::features).collect()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.shards.iter().map(FeatureShard::feature_offset).collect()
    }

    pub fn reassemble(&self) -> Result<(SparseBlock, DenseVec)> {
        let blocks: Vec<_> = self.shards.iter().map(|s| s.x.clone()).collect();
        let x = SparseBlock::vstack(&blocks)?;
        Ok((x, self.shards[0].labels.clone()))
    }
}

fn check_inputs(x: &SparseBlock, y: &DenseVec, m: usize, axis: &'static str, len: usize) -> Result<()> {
    check_len("partition labels", x.cols(), y.len())?;
    if m == 0 || m > len {
        return Err(DiscoError::EmptyShard { axis, len, m });
    }
    Ok(())
}

/// Splits the columns (samples) of `x` into `m` contiguous balanced shards.
pub fn partition_by_samples(x: &SparseBlock, y: &DenseVec, m: usize) -> Result<SamplePartition> {
    check_inputs(x, y, m, "samples", x.cols())?;
    let xt = x.transpose();
    let sizes = balanced_sizes(x.cols(), m);
    let shards = sizes
        .iter()
        .zip(offsets_of(&sizes))
        .map(|(&len, start)| SampleShard {
            xt: xt.select_rows(start..start + len),
            labels: DenseVec::from_vec(y[start..start + len].to_vec()),
        })
        .collect();
    Ok(SamplePartition {
        shards,
        d: x.rows(),
        n: x.cols(),
    })
}

/// Splits the rows (features) of `x` into `m` contiguous balanced shards.
pub fn partition_by_features(x: &SparseBlock, y: &DenseVec, m: usize) -> Result<FeaturePartition> {
    check_inputs(x, y, m, "features", x.rows())?;
    let sizes = balanced_sizes(x.rows(), m);
    let shards = sizes
        .iter()
        .zip(offsets_of(&sizes))
        .map(|(&len, start)| FeatureShard {
            x: x.select_rows(start..start + len),
            labels: y.clone(),
        })
        .collect();
    Ok(FeaturePartition {
        shards,
        d: x.rows(),
        n: x.cols(),
    })
}
