//! Gradient and Hessian-vector products on each data layout.
//!
//! A layout is evaluated at an iterate `wₖ` once per outer iteration; that
//! evaluation is where the gradient communication happens and where every
//! node caches the loss curvatures `hᵢ(wₖ)` of the samples it sees. Values
//! that a collective has replicated to all nodes are held once here.

use crate::comm::Cluster;
use crate::error::{check_len, Result};
use crate::linalg::{DenseVec, SparseBlock};
use crate::loss::Objective;
use crate::partition::{FeaturePartition, FeatureShard, SamplePartition, SampleShard};

#[derive(Debug, Clone)]
struct SampleNode<'a> {
    shard: &'a SampleShard,
    hess: Vec<f64>,
}

/// The sample layout evaluated at one iterate.
#[derive(Debug, Clone)]
pub struct SampleLayout<'a> {
    objective: Objective,
    nodes: Vec<SampleNode<'a>>,
    gradient: DenseVec,
}

impl<'a> SampleLayout<'a> {
    /// Broadcasts `w` (held by the master), lets every node form its local
    /// gradient sum `Σ gᵢ xᵢ`, and reduce-alls those sums. Costs one
    /// broadcast and one reduce-all of length `d`.
    pub fn evaluate(
        cluster: &mut Cluster,
        partition: &'a SamplePartition,
        objective: Objective,
        w: &DenseVec,
    ) -> Result<Self> {
        check_len("SampleLayout (nodes)", cluster.nodes(), partition.shards.len())?;
        check_len("SampleLayout (w)", partition.d, w.len())?;
        let replicas = cluster.broadcast(cluster.master(), w)?;
        let mut nodes: Vec<SampleNode<'a>> = partition
            .shards
            .iter()
            .map(|shard| SampleNode {
                shard,
                hess: Vec::new(),
            })
            .collect();
        let loss = objective.loss;
        let partials = cluster.run_mut(&mut nodes, |i, node| -> Result<DenseVec> {
            let xt = &node.shard.xt;
            let mut margins = vec![0.0; xt.rows()];
            xt.mul_into(&replicas[i], &mut margins);
            let coeffs = loss.grad_coeffs(&margins, &node.shard.labels)?;
            node.hess = loss.hess_coeffs(&margins, &node.shard.labels)?;
            let mut sum = DenseVec::zeros(xt.cols());
            xt.mul_transpose_into(&coeffs, &mut sum);
            Ok(sum)
        });
        let partials = partials.into_iter().collect::<Result<Vec<_>>>()?;
        let sums = cluster.reduce_all(partials)?;
        let gradient = objective.finish(&sums[cluster.master()], w);
        Ok(Self {
            objective,
            nodes,
            gradient,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// `∇f(wₖ)`, held by the master.
    pub fn gradient(&self) -> &DenseVec {
        &self.gradient
    }

    /// The master's first `tau` samples and their curvatures.
    pub fn master_preconditioner_samples(&self, tau: usize) -> (SparseBlock, &[f64]) {
        let master = &self.nodes[0];
        (master.shard.xt.select_rows(0..tau), &master.hess[..tau])
    }

    /// `H u`: broadcast `u`, local `Σ hᵢ xᵢ (xᵢᵀu)`, reduce-all, then add `λu`.
    pub fn hess_vec(&self, cluster: &mut Cluster, u: &DenseVec) -> Result<DenseVec> {
        check_len("hessian_vec_samples", self.objective.d, u.len())?;
        let replicas = cluster.broadcast(cluster.master(), u)?;
        let partials = cluster.run(|i| {
            let node = &self.nodes[i];
            let xt = &node.shard.xt;
            let mut z = vec![0.0; xt.rows()];
            xt.mul_into(&replicas[i], &mut z);
            for (zi, hi) in z.iter_mut().zip(&node.hess) {
                *zi *= hi;
            }
            let mut sum = DenseVec::zeros(xt.cols());
            xt.mul_transpose_into(&z, &mut sum);
            sum
        });
        let sums = cluster.reduce_all(partials)?;
        Ok(self.objective.finish(&sums[cluster.master()], u))
    }
}

/// Sample-layout Hessian-vector product; see [`SampleLayout::hess_vec`].
pub fn hessian_vec_samples(
    cluster: &mut Cluster,
    layout: &SampleLayout<'_>,
    u: &DenseVec,
) -> Result<DenseVec> {
    layout.hess_vec(cluster, u)
}

#[derive(Debug, Clone)]
struct FeatureNode<'a> {
    shard: &'a FeatureShard,
    w: DenseVec,
    gradient: DenseVec,
}

/// Output of one feature-layout Hessian product.
#[derive(Debug, Clone)]
pub struct FeatureHessProduct {
    /// `(Hu)ⁱ` held by node `i`.
    pub blocks: Vec<DenseVec>,
    /// Replicated margin product `z = Xᵀu`.
    pub z: Vec<f64>,
    /// Replicated `h ⊙ z`.
    pub hz: Vec<f64>,
}

/// The feature layout evaluated at one iterate.
#[derive(Debug, Clone)]
pub struct FeatureLayout<'a> {
    objective: Objective,
    nodes: Vec<FeatureNode<'a>>,
    margins: Vec<f64>,
    grad_coeffs: Vec<f64>,
    hess_coeffs: Vec<f64>,
}

impl<'a> FeatureLayout<'a> {
    /// Reduce-alls the margins `Xᵀw = Σᵢ Xᵢᵀwⁱ` (one length-`n` round);
    /// every node then forms the loss coefficients and its own gradient block.
    pub fn evaluate(
        cluster: &mut Cluster,
        partition: &'a FeaturePartition,
        objective: Objective,
        w_blocks: &[DenseVec],
    ) -> Result<Self> {
        check_len("FeatureLayout (nodes)", cluster.nodes(), partition.shards.len())?;
        check_len("FeatureLayout (w blocks)", partition.shards.len(), w_blocks.len())?;
        for (shard, w) in partition.shards.iter().zip(w_blocks) {
            check_len("FeatureLayout (w block)", shard.features(), w.len())?;
        }
        let n = partition.n;
        let partials = cluster.run(|i| {
            let mut z = DenseVec::zeros(n);
            partition.shards[i].x.mul_transpose_into(&w_blocks[i], &mut z);
            z
        });
        let margins = cluster.reduce_all(partials)?.swap_remove(0).into_vec();
        let labels = &partition.shards[0].labels;
        let grad_coeffs = objective.loss.grad_coeffs(&margins, labels)?;
        let hess_coeffs = objective.loss.hess_coeffs(&margins, labels)?;
        let mut nodes: Vec<FeatureNode<'a>> = partition
            .shards
            .iter()
            .zip(w_blocks)
            .map(|(shard, w)| FeatureNode {
                shard,
                w: w.clone(),
                gradient: DenseVec::default(),
            })
            .collect();
        cluster.run_mut(&mut nodes, |_, node| {
            let mut sum = vec![0.0; node.shard.features()];
            node.shard.x.mul_into(&grad_coeffs, &mut sum);
            node.gradient = objective.finish(&sum, &node.w);
        });
        Ok(Self {
            objective,
            nodes,
            margins,
            grad_coeffs,
            hess_coeffs,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Node `i`'s block of `∇f(wₖ)`.
    pub fn gradient_block(&self, i: usize) -> &DenseVec {
        &self.nodes[i].gradient
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn grad_coeffs(&self) -> &[f64] {
        &self.grad_coeffs
    }

    pub fn hess_coeffs(&self) -> &[f64] {
        &self.hess_coeffs
    }

    pub(crate) fn shard(&self, i: usize) -> &'a FeatureShard {
        self.nodes[i].shard
    }

    /// `(Hu)ⁱ = (1/n) Xᵢ (h ⊙ z) + λ uⁱ` with `z = Σᵢ Xᵢᵀuⁱ` reduce-all'd
    /// (one length-`n` round).
    pub fn hess_vec(&self, cluster: &mut Cluster, u_blocks: &[DenseVec]) -> Result<FeatureHessProduct> {
        check_len("hessian_vec_features (blocks)", self.nodes.len(), u_blocks.len())?;
        for (node, u) in self.nodes.iter().zip(u_blocks) {
            check_len("hessian_vec_features (block)", node.shard.features(), u.len())?;
        }
        let n = self.objective.n;
        let partials = cluster.run(|i| {
            let mut z = DenseVec::zeros(n);
            self.nodes[i].shard.x.mul_transpose_into(&u_blocks[i], &mut z);
            z
        });
        let z = cluster.reduce_all(partials)?.swap_remove(0).into_vec();
        let hz: Vec<f64> = z.iter().zip(&self.hess_coeffs).map(|(a, b)| a * b).collect();
        let blocks = cluster.run(|i| {
            let shard = self.nodes[i].shard;
            let mut sum = vec![0.0; shard.features()];
            shard.x.mul_into(&hz, &mut sum);
            self.objective.finish(&sum, &u_blocks[i])
        });
        Ok(FeatureHessProduct { blocks, z, hz })
    }
}

/// Feature-layout Hessian-vector product; see [`FeatureLayout::hess_vec`].
pub fn hessian_vec_features(
    cluster: &mut Cluster,
    layout: &FeatureLayout<'_>,
    u_blocks: &[DenseVec],
) -> Result<Vec<DenseVec>> {
    Ok(layout.hess_vec(cluster, u_blocks)?.blocks)
}
