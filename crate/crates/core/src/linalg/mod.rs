//! Vector and sparse-block primitives shared by both partition layouts.
//!
//! Every reduction walks its inputs in ascending index order, so repeated
//! runs are bit-identical and the two layouts can be compared at tight
//! tolerances.

mod cholesky;
mod dense;
mod sparse;

pub use cholesky::Cholesky;
pub use dense::{axpy, dot, norm2, DenseVec, PartitionedVec};
pub(crate) use dense::dot_slices;
pub use sparse::{spmv, spmv_transpose, SparseBlock};
