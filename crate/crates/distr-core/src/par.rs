//! Row-level parallelism helpers.
//!
//! Every helper writes disjoint output regions or sums collected partials in
//! index order, so results are bit-identical whether the `parallel` feature
//! is enabled or not, and independent of the rayon thread count.

use ndarray::{s, Array2, ArrayView2};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f(row_index, row)` to each row of a row-major buffer.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    data.par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    data.chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Sum `f(i)` over `0..n`, accumulating the partials in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    partials.iter().sum()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..n).map(f).sum()
}

/// Block size for the row-parallel matrix product.
const MATMUL_BLOCK: usize = 64;

/// Work threshold (m·k·n) below which the sequential product is used.
const MATMUL_CUTOFF: usize = 1 << 17;

/// `a · b` with the rows of the result computed in parallel blocks.
pub(crate) fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "matmul shape mismatch");
    // The blocked path is also taken in sequential builds so that both
    // builds accumulate in the same order.
    if m.saturating_mul(k).saturating_mul(n) < MATMUL_CUTOFF {
        return a.dot(&b);
    }
    let mut out = Array2::<f64>::zeros((m, n));
    {
        let buf = out
            .as_slice_mut()
            .expect("freshly allocated output is contiguous");
        for_each_row_blocks(buf, n, MATMUL_BLOCK, |r0, chunk| {
            let r1 = r0 + chunk.len() / n;
            let block = a.slice(s![r0..r1, ..]).dot(&b);
            chunk.copy_from_slice(block.as_slice().expect("dot output is contiguous"));
        });
    }
    out
}

/// Apply `f(first_row_index, rows)` to consecutive row blocks of a buffer.
#[cfg(feature = "parallel")]
fn for_each_row_blocks<F>(data: &mut [f64], cols: usize, block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    data.par_chunks_mut(block * cols)
        .enumerate()
        .for_each(|(bi, chunk)| f(bi * block, chunk));
}

#[cfg(not(feature = "parallel"))]
fn for_each_row_blocks<F>(data: &mut [f64], cols: usize, block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    data.chunks_mut(block * cols)
        .enumerate()
        .for_each(|(bi, chunk)| f(bi * block, chunk));
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn blocked_matmul_matches_dot() {
        let m = 130;
        let k = 70;
        let n = 40;
        let a = Array2::from_shape_fn((m, k), |(i, j)| ((i * 31 + j * 7) % 13) as f64 - 6.0);
        let b = Array2::from_shape_fn((k, n), |(i, j)| ((i * 17 + j * 3) % 11) as f64 - 5.0);
        let expected = a.dot(&b);
        let got = matmul(a.view(), b.view());
        assert_eq!(got, expected);
    }
}
