//! Blocked pairwise inner products and squared distances.
//!
//! Everything quadratic in the sample sizes funnels through this module. The
//! design constraints, in order:
//!
//! 1. **Determinism.** Each output entry is produced by exactly one call to
//!    the same fixed-association dot product, no matter how many worker
//!    threads run or how tiles are scheduled. Results are bit-identical
//!    across thread counts.
//! 2. **Throughput.** Dot products use four independent accumulators (wide
//!    enough for the compiler to vectorize, deep enough to hide FP latency),
//!    and the rectangular products are tiled so a block of rows from each
//!    side stays cache-resident while it is swept.
//! 3. **Robustness.** Squared distances are assembled from norms and inner
//!    products (`‖a‖² + ‖b‖² − 2⟨a,b⟩`), which can go negative by roundoff
//!    for near-duplicate rows; they are clamped at zero.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sample::SampleMatrix;
use crate::threads::{effective_threads, for_each_chunk_mut};

/// Rows per tile in the blocked sweeps. 32 rows of a p=1000 sample are
/// 256 KiB, comfortably L2-resident, and the tile count stays large enough
/// to balance a handful of worker threads.
const ROW_BLOCK: usize = 32;

/// Columns (rows of `b`) per inner tile; 8 rows at p=1000 are 64 KiB.
const COL_BLOCK: usize = 8;

/// Fixed-association dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean norm of each row.
pub(crate) fn row_sq_norms(a: &SampleMatrix) -> Vec<f64> {
    (0..a.n()).map(|i| dot(a.row(i), a.row(i))).collect()
}

/// Inner-product matrix `G[i][j] = ⟨a_i, b_j⟩`, tiled and parallel over row
/// blocks of `a`.
pub(crate) fn gram_rect(a: &SampleMatrix, b: &SampleMatrix, threads: usize) -> Matrix {
    let (na, nb) = (a.n(), b.n());
    let mut out = vec![0.0f64; na * nb];
    for_each_chunk_mut(&mut out, ROW_BLOCK * nb, threads, |chunk_idx, chunk| {
        let i0 = chunk_idx * ROW_BLOCK;
        let rows = chunk.len() / nb;
        for j0 in (0..nb).step_by(COL_BLOCK) {
            let j1 = (j0 + COL_BLOCK).min(nb);
            for di in 0..rows {
                let ai = a.row(i0 + di);
                let row_out = &mut chunk[di * nb..(di + 1) * nb];
                for j in j0..j1 {
                    row_out[j] = dot(ai, b.row(j));
                }
            }
        }
    });
    Matrix::from_vec(na, nb, out).expect("buffer sized to na*nb")
}

/// Symmetric inner-product matrix `G[i][j] = ⟨a_i, a_j⟩`. Computes the upper
/// triangle (tile-wise) and mirrors it, roughly halving the work of
/// [`gram_rect`]. Entries are bit-identical to the rectangular path because
/// both produce `G[i][j]` (for `i ≤ j`) from the same `dot(a_i, a_j)` call.
pub(crate) fn gram_sym(a: &SampleMatrix, threads: usize) -> Matrix {
    let n = a.n();
    let mut out = vec![0.0f64; n * n];
    for_each_chunk_mut(&mut out, ROW_BLOCK * n, threads, |chunk_idx, chunk| {
        let i0 = chunk_idx * ROW_BLOCK;
        let rows = chunk.len() / n;
        for j0 in (i0..n).step_by(COL_BLOCK) {
            let j1 = (j0 + COL_BLOCK).min(n);
            for di in 0..rows {
                let i = i0 + di;
                let ai = a.row(i);
                let row_out = &mut chunk[di * n..(di + 1) * n];
                for j in j0.max(i)..j1 {
                    row_out[j] = dot(ai, a.row(j));
                }
            }
        }
    });
    // Mirror the strict upper triangle down.
    for i in 0..n {
        for j in (i + 1)..n {
            out[j * n + i] = out[i * n + j];
        }
    }
    Matrix::from_vec(n, n, out).expect("buffer sized to n*n")
}

/// Full matrix of squared Euclidean distances `‖a_i − b_j‖²`, clamped at
/// zero against roundoff. Runs on the crate-default worker count.
///
/// # Errors
///
/// [`Error::DimensionMismatch`] if the samples differ in dimension.
pub fn squared_distance_block(a: &SampleMatrix, b: &SampleMatrix) -> Result<Matrix> {
    squared_distance_block_threaded(a, b, effective_threads())
}

/// [`squared_distance_block`] with an explicit worker count.
pub fn squared_distance_block_threaded(
    a: &SampleMatrix,
    b: &SampleMatrix,
    threads: usize,
) -> Result<Matrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "sample dimension",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let g = gram_rect(a, b, threads);
    let sa = row_sq_norms(a);
    let sb = row_sq_norms(b);
    let (na, nb) = (a.n(), b.n());
    let mut out = vec![0.0f64; na * nb];
    for i in 0..na {
        let gi = g.row(i);
        let oi = &mut out[i * nb..(i + 1) * nb];
        for j in 0..nb {
            oi[j] = (sa[i] + sb[j] - 2.0 * gi[j]).max(0.0);
        }
    }
    Ok(Matrix::from_vec(na, nb, out).expect("buffer sized to na*nb"))
}
