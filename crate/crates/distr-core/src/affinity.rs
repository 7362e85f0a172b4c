//! Similarity graph builders for the input space and the embedding space.
//!
//! Each builder returns a [`SimilarityGraph`]: a symmetric matrix `C`, a node
//! weight histogram `h`, and optionally an exact low-rank factor `A` with
//! `C = A Aᵀ`. The supported kinds follow the usual dimensionality-reduction
//! families: linear Gram (PCA), double-centered squared distances (classical
//! MDS), symmetrized entropic affinities (neighbor embeddings), and the
//! scalar-normalized Student-t kernel for the embedding side.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::numkit::{check_finite, pairwise_sqdist};
use crate::par;

/// Which builder produced a graph. KL-loss validity checks key off this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    /// Inner products `X Xᵀ`.
    Gram,
    /// Double-centered squared distances `−½ H D H`.
    MdsGram,
    /// Symmetrized perplexity-calibrated Gaussian affinities, total mass 1.
    EntropicAffinity,
    /// Scalar-normalized Student-t kernel, total mass 1.
    Student,
    /// Caller-supplied matrix.
    Custom,
}

/// A weighted similarity graph, the basic object both solvers consume.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    c: Array2<f64>,
    weights: Array1<f64>,
    low_rank: Option<Array2<f64>>,
    kind: SimilarityKind,
}

/// Symmetry slack accepted when building a graph.
const GRAPH_SYM_TOL: f64 = 1e-10;
/// Reconstruction slack for an attached low-rank factor.
const FACTOR_TOL: f64 = 1e-10;

impl SimilarityGraph {
    /// Build a graph from parts, validating the structural invariants.
    pub fn new(
        c: Array2<f64>,
        weights: Array1<f64>,
        low_rank: Option<Array2<f64>>,
        kind: SimilarityKind,
    ) -> Result<Self> {
        let n = c.nrows();
        if c.ncols() != n {
            return Err(Error::Contract(format!(
                "similarity matrix must be square, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Contract("similarity matrix is empty".into()));
        }
        check_finite(c.view(), "similarity matrix")?;
        for i in 0..n {
            for j in (i + 1)..n {
                if (c[[i, j]] - c[[j, i]]).abs() > GRAPH_SYM_TOL {
                    return Err(Error::Contract(format!(
                        "similarity matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if weights.len() != n {
            return Err(Error::Contract(format!(
                "weight histogram length {} does not match graph size {n}",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Contract(
                "weights must be nonnegative and finite".into(),
            ));
        }
        if (weights.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!(
                "weights must sum to 1, got {}",
                weights.sum()
            )));
        }
        if let Some(a) = &low_rank {
            if a.nrows() != n {
                return Err(Error::Contract(
                    "low-rank factor row count does not match graph size".into(),
                ));
            }
            let rec = a.dot(&a.t());
            let err = (&rec - &c).iter().map(|v| v * v).sum::<f64>().sqrt();
            if err > FACTOR_TOL {
                return Err(Error::Contract(format!(
                    "low-rank factor does not reproduce the matrix: ‖C − AAᵀ‖_F = {err:.3e}"
                )));
            }
        }
        Ok(Self {
            c,
            weights,
            low_rank,
            kind,
        })
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.c.nrows()
    }

    /// The dense similarity matrix.
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.c.view()
    }

    /// Node weight histogram on the simplex.
    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    /// Exact factor `A` with `C = A Aᵀ`, when one is known.
    pub fn low_rank(&self) -> Option<ArrayView2<'_, f64>> {
        self.low_rank.as_ref().map(|a| a.view())
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    /// True when every entry is strictly positive (KL `h₂ = log` domain).
    pub fn is_strictly_positive(&self) -> bool {
        self.c.iter().all(|&v| v > 0.0)
    }

    /// True when every entry is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.c.iter().all(|&v| v >= 0.0)
    }
}

fn uniform_weights(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

/// Linear Gram graph `C = X Xᵀ` with uniform weights and factor `A = X`.
pub fn linear_gram(x: ArrayView2<'_, f64>) -> Result<SimilarityGraph> {
    if x.nrows() == 0 {
        return Err(Error::Contract("input matrix is empty".into()));
    }
    check_finite(x, "Gram input")?;
    let c = par::matmul(x, x.t());
    let n = c.nrows();
    // Symmetrize away round-off so the invariant holds exactly.
    let mut c = c;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c[[i, j]] + c[[j, i]]);
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    SimilarityGraph::new(
        c,
        uniform_weights(n),
        Some(x.to_owned()),
        SimilarityKind::Gram,
    )
}

/// Classical MDS Gram matrix `−½ H D H` from squared distances `D`.
pub fn mds_gram(d: ArrayView2<'_, f64>) -> Result<SimilarityGraph> {
    let n = d.nrows();
    if d.ncols() != n || n == 0 {
        return Err(Error::Contract(
            "distance matrix must be square and non-empty".into(),
        ));
    }
    check_finite(d, "MDS input")?;
    for i in 0..n {
        if d[[i, i]].abs() > 1e-12 {
            return Err(Error::Contract(
                "distance matrix must have a zero diagonal".into(),
            ));
        }
        for j in (i + 1)..n {
            if (d[[i, j]] - d[[j, i]]).abs() > 1e-10 {
                return Err(Error::Contract("distance matrix must be symmetric".into()));
            }
            if d[[i, j]] < 0.0 {
                return Err(Error::Contract(
                    "distance matrix must be nonnegative".into(),
                ));
            }
        }
    }
    // −½ H D H expanded: c_ij = −½ (d_ij − r_i − r_j + g) with row means r and
    // grand mean g.
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut c = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            c[[i, j]] = -0.5 * (d[[i, j]] - row_means[i] - row_means[j] + grand);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c[[i, j]] + c[[j, i]]);
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    SimilarityGraph::new(c, uniform_weights(n), None, SimilarityKind::MdsGram)
}

/// Bisection bracket and budget for the per-row bandwidth search.
const SIGMA_LO: f64 = 1e-12;
const SIGMA_HI: f64 = 1e12;
const BISECT_MAX_ITER: usize = 200;
/// Default entropy tolerance for the bandwidth search.
pub const ENTROPY_TOL: f64 = 1e-6;

/// Shannon entropy of the normalized Gaussian row at bandwidth `sigma`,
/// with the probabilities written into `probs` (diagonal excluded).
fn row_entropy(dists: &[f64], sigma: f64, probs: &mut [f64]) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    // Shift by the min distance so the largest logit is 0.
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (p, &d) in probs.iter_mut().zip(dists) {
        let v = (-(d - dmin) * inv).exp();
        *p = v;
        total += v;
    }
    let mut entropy = 0.0;
    for p in probs.iter_mut() {
        *p /= total;
        if *p > 0.0 {
            entropy -= *p * p.ln();
        }
    }
    entropy
}

/// Row-stochastic perplexity-calibrated Gaussian affinities (zero diagonal).
///
/// This is the pre-symmetrization matrix `P`; exposed at crate level so tests
/// can check the per-row entropy calibration directly.
pub(crate) fn entropic_rows(
    x: ArrayView2<'_, f64>,
    perplexity: f64,
    tol: f64,
) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Contract(
            "entropic affinity needs at least 2 points".into(),
        ));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::Parameter(format!(
            "perplexity must lie in (1, N={n}), got {perplexity}"
        )));
    }
    let d = pairwise_sqdist(x)?;
    let target = perplexity.ln();

    let mut p = Array2::<f64>::zeros((n, n));
    let errors: std::sync::Mutex<Vec<(usize, f64)>> = std::sync::Mutex::new(Vec::new());
    {
        let buf = p.as_slice_mut().expect("contiguous");
        par::for_each_row(buf, n, |i, row| {
            let dists: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).collect();
            let mut probs = vec![0.0; n - 1];
            if n == 2 {
                // A single neighbor takes all the mass; no bandwidth to fit.
                probs[0] = 1.0;
            } else {
                let mut lo = SIGMA_LO;
                let mut hi = SIGMA_HI;
                let mut ok = false;
                let mut best_residual = f64::INFINITY;
                for _ in 0..BISECT_MAX_ITER {
                    let mid = 0.5 * (lo + hi);
                    let entropy = row_entropy(&dists, mid, &mut probs);
                    let residual = entropy - target;
                    if residual.abs() < tol {
                        ok = true;
                        break;
                    }
                    best_residual = best_residual.min(residual.abs());
                    // Entropy grows with sigma.
                    if residual > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if !ok {
                    errors.lock().unwrap().push((i, best_residual));
                    return;
                }
            }
            let mut k = 0;
            for (j, slot) in row.iter_mut().enumerate() {
                if j != i {
                    *slot = probs[k];
                    k += 1;
                }
            }
        });
    }
    let errs = errors.into_inner().unwrap();
    if let Some((_row, residual)) = errs.into_iter().min_by_key(|&(i, _)| i) {
        return Err(Error::IterationLimit {
            what: "entropic affinity bandwidth bisection",
            iterations: BISECT_MAX_ITER,
            residual,
        });
    }
    Ok(p)
}

/// Symmetrized entropic affinity `C = (P + Pᵀ) / 2N`, total mass 1.
///
/// Each row's Gaussian bandwidth is found by bisection so that the row's
/// Shannon entropy (diagonal excluded) equals `log(perplexity)` within `tol`.
pub fn entropic_affinity(
    x: ArrayView2<'_, f64>,
    perplexity: f64,
    tol: f64,
) -> Result<SimilarityGraph> {
    let p = entropic_rows(x, perplexity, tol)?;
    let n = p.nrows();
    let scale = 1.0 / (2.0 * n as f64);
    let mut c = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            c[[i, j]] = (p[[i, j]] + p[[j, i]]) * scale;
        }
    }
    SimilarityGraph::new(
        c,
        uniform_weights(n),
        None,
        SimilarityKind::EntropicAffinity,
    )
}

/// Scalar-normalized Student-t similarity `C = K / ΣK`,
/// `K_ij = (1 + ‖zi − zj‖²)⁻¹` with `K_ii = 1`.
pub fn student_similarity(z: ArrayView2<'_, f64>) -> Result<SimilarityGraph> {
    check_finite(z, "Student kernel input")?;
    let n = z.nrows();
    if n == 0 {
        return Err(Error::Contract("input matrix is empty".into()));
    }
    let d = pairwise_sqdist(z)?;
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = 1.0 / (1.0 + d[[i, j]]);
        }
    }
    let total: f64 = k.sum();
    k.mapv_inplace(|v| v / total);
    SimilarityGraph::new(k, uniform_weights(n), None, SimilarityKind::Student)
}

/// Dense Student kernel and its scalar normalizer for a set of prototypes.
/// Used by the embedding backward pass, which needs `K` and `ΣK` separately.
pub(crate) fn student_kernel_parts(z: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64)> {
    let d = pairwise_sqdist(z)?;
    let k = d.mapv(|v| 1.0 / (1.0 + v));
    let total = k.sum();
    Ok((k, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn gram_identity_input() {
        let g = linear_gram(Array2::<f64>::eye(2).view()).unwrap();
        assert_eq!(g.matrix()[[0, 0]], 1.0);
        assert_eq!(g.matrix()[[0, 1]], 0.0);
        assert_eq!(g.weights()[0], 0.5);
    }

    #[test]
    fn gram_single_row() {
        let x = array![[1.0, 1.0]];
        let g = linear_gram(x.view()).unwrap();
        assert_eq!(g.matrix()[[0, 0]], 2.0);
    }

    #[test]
    fn gram_factor_reproduces_dense() {
        let x = random_matrix(6, 3, 42);
        let g = linear_gram(x.view()).unwrap();
        let a = g.low_rank().unwrap();
        let rec = a.dot(&a.t());
        for (u, v) in rec.iter().zip(g.matrix().iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn mds_two_points() {
        // Points {0, 2} on the line; centered coordinates {−1, +1}.
        let d = array![[0.0, 4.0], [4.0, 0.0]];
        let g = mds_gram(d.view()).unwrap();
        assert!((g.matrix()[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((g.matrix()[[0, 1]] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mds_recovers_gram_of_centered_points() {
        let mut x = random_matrix(8, 3, 5);
        let means: Vec<f64> = (0..3).map(|j| x.column(j).sum() / 8.0).collect();
        for i in 0..8 {
            for j in 0..3 {
                x[[i, j]] -= means[j];
            }
        }
        let d = pairwise_sqdist(x.view()).unwrap();
        let g = mds_gram(d.view()).unwrap();
        let gram = x.dot(&x.t());
        for (u, v) in g.matrix().iter().zip(gram.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn mds_single_point() {
        let d = array![[0.0]];
        let g = mds_gram(d.view()).unwrap();
        assert!(g.matrix()[[0, 0]].abs() < 1e-15);
    }

    #[test]
    fn mds_rejects_asymmetric() {
        let d = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(matches!(mds_gram(d.view()), Err(Error::Contract(_))));
    }

    #[test]
    fn entropic_two_points_forced() {
        let x = array![[0.0], [3.0]];
        let g = entropic_affinity(x.view(), 1.5, ENTROPY_TOL).unwrap();
        assert!((g.matrix()[[0, 1]] - 0.5).abs() < 1e-12);
        assert!((g.matrix()[[1, 0]] - 0.5).abs() < 1e-12);
        assert_eq!(g.matrix()[[0, 0]], 0.0);
        assert!((g.matrix().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropic_row_entropy_hits_target() {
        let x = random_matrix(20, 3, 9);
        let perplexity = 6.0;
        let n = 20;
        let p = entropic_rows(x.view(), perplexity, 1e-7).unwrap();
        for i in 0..n {
            assert_eq!(p[[i, i]], 0.0);
            assert!((p.row(i).sum() - 1.0).abs() < 1e-12);
            let mut entropy = 0.0;
            for j in 0..n {
                let v = p[[i, j]];
                if v > 0.0 {
                    entropy -= v * v.ln();
                }
            }
            assert!(
                (entropy - perplexity.ln()).abs() < 1e-5,
                "row {i} entropy {entropy} vs target {}",
                perplexity.ln()
            );
        }
        // Graph-level invariants after symmetrization.
        let g = entropic_affinity(x.view(), perplexity, 1e-7).unwrap();
        assert!((g.matrix().sum() - 1.0).abs() < 1e-9);
        for i in 0..n {
            assert_eq!(g.matrix()[[i, i]], 0.0);
        }
        assert!(g.matrix().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn entropic_rejects_bad_perplexity() {
        let x = random_matrix(5, 2, 1);
        assert!(matches!(
            entropic_affinity(x.view(), 5.0, ENTROPY_TOL),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            entropic_affinity(x.view(), 1.0, ENTROPY_TOL),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn student_identical_prototypes() {
        let z = array![[1.0, 2.0], [1.0, 2.0]];
        let g = student_similarity(z.view()).unwrap();
        for v in g.matrix().iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn student_decreases_with_distance() {
        let z = array![[0.0], [1.0], [3.0]];
        let g = student_similarity(z.view()).unwrap();
        // d(0,1) = 1 < d(0,2) = 9 ⇒ C[0,1] > C[0,2].
        assert!(g.matrix()[[0, 1]] > g.matrix()[[0, 2]]);
        assert!(g.matrix()[[1, 2]] > g.matrix()[[0, 2]]);
        assert!((g.matrix().sum() - 1.0).abs() < 1e-12);
        assert!(g.is_strictly_positive());
    }

    #[test]
    fn builders_are_permutation_equivariant() {
        let x = random_matrix(7, 3, 21);
        let perm: Vec<usize> = vec![3, 0, 6, 2, 5, 1, 4];
        let mut px = Array2::<f64>::zeros((7, 3));
        for (dst, &src) in perm.iter().enumerate() {
            px.row_mut(dst).assign(&x.row(src));
        }

        let check = |c: ArrayView2<'_, f64>, pc: ArrayView2<'_, f64>| {
            for i in 0..7 {
                for j in 0..7 {
                    let want = c[[perm[i], perm[j]]];
                    assert!(
                        (pc[[i, j]] - want).abs() < 1e-10,
                        "equivariance violated at ({i},{j})"
                    );
                }
            }
        };

        check(
            linear_gram(x.view()).unwrap().matrix(),
            linear_gram(px.view()).unwrap().matrix(),
        );
        check(
            mds_gram(pairwise_sqdist(x.view()).unwrap().view())
                .unwrap()
                .matrix(),
            mds_gram(pairwise_sqdist(px.view()).unwrap().view())
                .unwrap()
                .matrix(),
        );
        check(
            entropic_affinity(x.view(), 3.0, ENTROPY_TOL)
                .unwrap()
                .matrix(),
            entropic_affinity(px.view(), 3.0, ENTROPY_TOL)
                .unwrap()
                .matrix(),
        );
        check(
            student_similarity(x.view()).unwrap().matrix(),
            student_similarity(px.view()).unwrap().matrix(),
        );
    }
}
