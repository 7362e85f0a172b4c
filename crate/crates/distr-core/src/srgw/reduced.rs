//! Reduced objective `F(T)`, its gradient, the linear oracle and the exact
//! line search.
//!
//! With the decomposition `L(a,b) = f1(a) + f2(b) − h1(a)h2(b)` (and
//! `h1 = id` for both supported losses) the quadratic objective collapses to
//!
//! ```text
//! F(T) = qᵀ f2(C̄) q − ⟨C T h2(C̄)ᵀ, T⟩,      q = Tᵀ 1_N,
//! ```
//!
//! which is the full objective minus the plan-independent `Σ f1(C_ij) h_i h_j`.
//! When both graphs carry exact factors `C = AAᵀ`, `C̄ = BBᵀ`, the bilinear
//! term is evaluated through the factors without forming any N×N product.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::affinity::SimilarityGraph;
use crate::error::{Error, Result};
use crate::loss::DecomposableLoss;
use crate::par;

use super::{column_sums, Coupling};

fn check_shapes(cx: &SimilarityGraph, cz: &SimilarityGraph, t: &Coupling) -> Result<()> {
    let (rows, cols) = t.shape();
    if rows != cx.size() || cols != cz.size() {
        return Err(Error::Contract(format!(
            "coupling shape {rows}x{cols} does not match graphs {}x{}",
            cx.size(),
            cz.size()
        )));
    }
    Ok(())
}

fn check_domains(cx: &SimilarityGraph, cz: &SimilarityGraph, loss: DecomposableLoss) -> Result<()> {
    loss.check_source_domain(cx.matrix())?;
    loss.check_target_domain(cz.matrix())?;
    Ok(())
}

/// Precomputed dense operands shared by the objective, gradient and line
/// search at a fixed pair of graphs.
pub(crate) struct DenseOps<'a> {
    c: ArrayView2<'a, f64>,
    f2_cbar: Array2<f64>,
    h2_cbar: Array2<f64>,
}

impl<'a> DenseOps<'a> {
    pub(crate) fn new(
        cx: &'a SimilarityGraph,
        cz: &SimilarityGraph,
        loss: DecomposableLoss,
    ) -> Result<Self> {
        check_domains(cx, cz, loss)?;
        Ok(Self {
            c: cx.matrix(),
            f2_cbar: cz.matrix().mapv(|b| loss.f2(b)),
            h2_cbar: cz.matrix().mapv(|b| loss.h2(b)),
        })
    }

    /// `C · M · h2(C̄)` for an N×n matrix `M` (graphs are symmetric).
    fn bilinear(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let cm = par::matmul(self.c, m);
        par::matmul(cm.view(), self.h2_cbar.view())
    }

    /// `f2(C̄) · q`.
    fn marginal_term(&self, q: &Array1<f64>) -> Array1<f64> {
        self.f2_cbar.dot(q)
    }

    pub(crate) fn objective(&self, t: ArrayView2<'_, f64>) -> f64 {
        let q = column_sums(t);
        let term1 = q.dot(&self.marginal_term(&q));
        let w = self.bilinear(t);
        let term2: f64 = w.iter().zip(t.iter()).map(|(a, b)| a * b).sum();
        term1 - term2
    }

    pub(crate) fn gradient(&self, t: ArrayView2<'_, f64>) -> Array2<f64> {
        let q = column_sums(t);
        let f1_row = self.marginal_term(&q);
        let w = self.bilinear(t);
        let (rows, cols) = t.dim();
        let mut g = Array2::<f64>::zeros((rows, cols));
        {
            let buf = g.as_slice_mut().expect("contiguous");
            par::for_each_row(buf, cols, |i, row| {
                for k in 0..cols {
                    row[k] = 2.0 * (f1_row[k] - w[[i, k]]);
                }
            });
        }
        g
    }

    /// Quadratic coefficients of `γ ↦ F(T + γ D)` for a zero-row-sum `D`.
    pub(crate) fn line_coefficients(
        &self,
        t: ArrayView2<'_, f64>,
        d: ArrayView2<'_, f64>,
    ) -> (f64, f64) {
        let q_t = column_sums(t);
        let q_d = column_sums(d);
        let s_qt = self.marginal_term(&q_t);
        let s_qd = self.marginal_term(&q_d);
        let f2_t = self.bilinear(t);
        let f2_d = self.bilinear(d);

        let dot = |m: &Array2<f64>, x: ArrayView2<'_, f64>| -> f64 {
            m.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
        };
        let a = q_d.dot(&s_qd) - dot(&f2_d, d);
        let b = q_d.dot(&s_qt) + q_t.dot(&s_qd) - dot(&f2_t, d) - dot(&f2_d, t);
        (a, b)
    }
}

/// Reduced objective via the dense `O(nN² + n²N)` path.
pub fn objective_reduced_dense(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<f64> {
    check_shapes(cx, cz, t)?;
    Ok(DenseOps::new(cx, cz, loss)?.objective(t.matrix()))
}

/// Gradient `∇F = F1(C̄,T) + F1(C̄ᵀ,T) − F2(C,C̄,T) − F2(Cᵀ,C̄ᵀ,T)`,
/// computed as `2(F1 − F2)` since all graphs here are symmetric.
pub fn gradient_reduced_dense(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<Array2<f64>> {
    check_shapes(cx, cz, t)?;
    Ok(DenseOps::new(cx, cz, loss)?.gradient(t.matrix()))
}

fn require_factors<'a>(
    cx: &'a SimilarityGraph,
    cz: &'a SimilarityGraph,
) -> Result<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)> {
    match (cx.low_rank(), cz.low_rank()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Contract(
            "factored path requires low-rank factors on both graphs".into(),
        )),
    }
}

/// Reduced objective through the exact low-rank factors.
///
/// L2 costs `O(Nn(r+s) + rs(N+n) + n²)`; KL costs `O(Nnr + n²r)`.
pub fn objective_reduced_factored(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<f64> {
    check_shapes(cx, cz, t)?;
    check_domains(cx, cz, loss)?;
    let (a, b) = require_factors(cx, cz)?;
    let tm = t.matrix();
    let q = column_sums(tm);
    let v = par::matmul(a.t(), tm); // r×n

    match loss {
        DecomposableLoss::L2 => {
            let cbar = b.dot(&b.t());
            let sq = cbar.mapv(|x| x * x);
            let term1 = q.dot(&sq.dot(&q));
            // ⟨C T 2C̄, T⟩ = 2 tr(Vᵀ V B Bᵀ) = 2 ‖V B‖²
            let vb = v.dot(&b);
            let term2 = 2.0 * vb.iter().map(|x| x * x).sum::<f64>();
            Ok(term1 - term2)
        }
        DecomposableLoss::Kl => {
            // term1 = qᵀ C̄ q = ‖Bᵀ q‖²
            let bq = b.t().dot(&q);
            let term1 = bq.iter().map(|x| x * x).sum::<f64>();
            let log_cbar = log_target(b)?;
            // ⟨C T log C̄, T⟩ = ⟨Vᵀ V, log C̄⟩
            let vtv = v.t().dot(&v);
            let term2: f64 = vtv.iter().zip(log_cbar.iter()).map(|(x, y)| x * y).sum();
            Ok(term1 - term2)
        }
    }
}

/// Gradient through the exact low-rank factors; mirrors
/// [`objective_reduced_factored`].
pub fn gradient_reduced_factored(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<Array2<f64>> {
    check_shapes(cx, cz, t)?;
    check_domains(cx, cz, loss)?;
    let (a, b) = require_factors(cx, cz)?;
    let tm = t.matrix();
    let (rows, cols) = tm.dim();
    let q = column_sums(tm);
    let v = par::matmul(a.t(), tm); // r×n

    let (f1_row, f2_mat) = match loss {
        DecomposableLoss::L2 => {
            let cbar = b.dot(&b.t());
            let sq = cbar.mapv(|x| x * x);
            let f1_row = sq.dot(&q);
            // C T 2C̄ = 2 A ((V B) Bᵀ)
            let vb = v.dot(&b);
            let vbbt = vb.dot(&b.t());
            let f2 = par::matmul(a, vbbt.view()).mapv(|x| 2.0 * x);
            (f1_row, f2)
        }
        DecomposableLoss::Kl => {
            let bq = b.t().dot(&q);
            let f1_row = b.dot(&bq);
            let log_cbar = log_target(b)?;
            let vl = v.dot(&log_cbar);
            let f2 = par::matmul(a, vl.view());
            (f1_row, f2)
        }
    };
    let mut g = Array2::<f64>::zeros((rows, cols));
    {
        let buf = g.as_slice_mut().expect("contiguous");
        par::for_each_row(buf, cols, |i, row| {
            for k in 0..cols {
                row[k] = 2.0 * (f1_row[k] - f2_mat[[i, k]]);
            }
        });
    }
    Ok(g)
}

/// `log(B Bᵀ)` with the KL positivity check.
fn log_target(b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let cbar = b.dot(&b.t());
    if let Some(v) = cbar.iter().find(|v| **v <= 0.0) {
        return Err(Error::Domain(format!(
            "KL loss requires strictly positive target similarities, found {v}"
        )));
    }
    Ok(cbar.mapv(f64::ln))
}

/// Reduced objective, dispatching to the factored path when both graphs
/// carry exact factors.
pub fn objective_reduced(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<f64> {
    if cx.low_rank().is_some() && cz.low_rank().is_some() {
        objective_reduced_factored(cx, cz, t, loss)
    } else {
        objective_reduced_dense(cx, cz, t, loss)
    }
}

/// Gradient of the reduced objective, dispatching like [`objective_reduced`].
pub fn gradient_reduced(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<Array2<f64>> {
    if cx.low_rank().is_some() && cz.low_rank().is_some() {
        gradient_reduced_factored(cx, cz, t, loss)
    } else {
        gradient_reduced_dense(cx, cz, t, loss)
    }
}

/// Minimize `⟨X, G⟩` over `{X ≥ 0, X 1_n = h}`.
///
/// The solution is row-separable: all of row `i`'s mass goes to the column
/// with the smallest gradient entry (ties to the smallest index), so the
/// result is a membership matrix scaled by `h`.
pub fn linear_oracle(g: ArrayView2<'_, f64>, h: ArrayView1<'_, f64>) -> Result<Coupling> {
    let (rows, cols) = g.dim();
    if h.len() != rows {
        return Err(Error::Contract(format!(
            "histogram length {} does not match gradient rows {rows}",
            h.len()
        )));
    }
    if cols == 0 {
        return Err(Error::Contract("gradient has no columns".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(
            "gradient contains non-finite entries".into(),
        ));
    }
    let mut x = Array2::<f64>::zeros((rows, cols));
    for i in 0..rows {
        let mut best = 0usize;
        for k in 1..cols {
            if g[[i, k]] < g[[i, best]] {
                best = k;
            }
        }
        x[[i, best]] = h[i];
    }
    Ok(Coupling::from_matrix_unchecked(x, h.to_owned()))
}

/// Exact line search for `γ ↦ F(T + γ D)` over `[0, 1]`.
///
/// `D` must have zero row sums (a feasible direction, typically `X − T` for
/// an oracle vertex `X`). Returns `(γ*, a, b)` where
/// `F(T + γD) = aγ² + bγ + F(T)`.
pub fn exact_line_search(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    d: ArrayView2<'_, f64>,
    loss: DecomposableLoss,
) -> Result<(f64, f64, f64)> {
    check_shapes(cx, cz, t)?;
    if d.dim() != t.shape() {
        return Err(Error::Contract(
            "direction shape does not match the plan".into(),
        ));
    }
    for (i, row) in d.rows().into_iter().enumerate() {
        if row.sum().abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "direction row {i} sums to {} instead of 0",
                row.sum()
            )));
        }
    }
    let ops = DenseOps::new(cx, cz, loss)?;
    let (a, b) = ops.line_coefficients(t.matrix(), d);
    Ok((minimize_quadratic_on_unit(a, b), a, b))
}

/// Argmin of `aγ² + bγ` over `[0, 1]`.
pub(crate) fn minimize_quadratic_on_unit(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a < 0.0 {
        // Concave: best endpoint.
        if a + b < 0.0 {
            1.0
        } else {
            0.0
        }
    } else if b < 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::loss::gw_objective_bruteforce;
    use crate::srgw::constant_term;
    use ndarray::{array, Array1, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn objective_zero_target_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cx = random_graph(6, 0.0, 2.0, &mut rng);
        let cz = {
            use crate::affinity::{SimilarityGraph, SimilarityKind};
            SimilarityGraph::new(
                Array2::zeros((3, 3)),
                Array1::from_elem(3, 1.0 / 3.0),
                None,
                SimilarityKind::Custom,
            )
            .unwrap()
        };
        for _ in 0..5 {
            let t = random_coupling(6, 3, &mut rng);
            let f = objective_reduced(&cx, &cz, &t, DecomposableLoss::L2).unwrap();
            assert!(f.abs() < 1e-14);
        }
    }

    #[test]
    fn objective_hand_expansion_single_node() {
        use crate::affinity::{SimilarityGraph, SimilarityKind};
        let cx = SimilarityGraph::new(
            array![[0.0, 1.0], [1.0, 0.0]],
            array![0.5, 0.5],
            None,
            SimilarityKind::Custom,
        )
        .unwrap();
        let cz =
            SimilarityGraph::new(array![[0.0]], array![1.0], None, SimilarityKind::Custom).unwrap();
        let t = Coupling::new(array![[0.5], [0.5]], array![0.5, 0.5]).unwrap();
        let f = objective_reduced(&cx, &cz, &t, DecomposableLoss::L2).unwrap();
        assert!(f.abs() < 1e-15);
        let full = f + constant_term(&cx, DecomposableLoss::L2);
        assert!((full - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduced_plus_constant_equals_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..30 {
            let cx = random_graph(8, 0.05, 2.0, &mut rng);
            let cz = random_graph(4, 0.05, 2.0, &mut rng);
            let t = random_coupling(8, 4, &mut rng);
            for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
                let reduced = objective_reduced(&cx, &cz, &t, loss).unwrap();
                let full = reduced + constant_term(&cx, loss);
                let brute = gw_objective_bruteforce(&cx, &cz, &t, loss).unwrap();
                assert!(
                    (full - brute).abs() < 1e-10,
                    "trial {trial} {loss:?}: reduced {full} vs brute {brute}"
                );
            }
        }
    }

    fn fd_gradient(
        cx: &crate::affinity::SimilarityGraph,
        cz: &crate::affinity::SimilarityGraph,
        t: &Coupling,
        loss: DecomposableLoss,
        factored: bool,
    ) -> Array2<f64> {
        let (rows, cols) = t.shape();
        let h = t.source_marginal().clone();
        let eps = 1e-6;
        let mut g = Array2::<f64>::zeros((rows, cols));
        let eval = |m: Array2<f64>| -> f64 {
            let c = Coupling::from_matrix_unchecked(m, h.clone());
            if factored {
                objective_reduced_factored(cx, cz, &c, loss).unwrap()
            } else {
                objective_reduced_dense(cx, cz, &c, loss).unwrap()
            }
        };
        for i in 0..rows {
            for k in 0..cols {
                let mut plus = t.matrix().to_owned();
                plus[[i, k]] += eps;
                let mut minus = t.matrix().to_owned();
                minus[[i, k]] -= eps;
                g[[i, k]] = (eval(plus) - eval(minus)) / (2.0 * eps);
            }
        }
        g
    }

    #[test]
    fn gradient_matches_finite_differences_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let cx = random_graph(8, 0.05, 2.0, &mut rng);
            let cz = random_graph(4, 0.05, 2.0, &mut rng);
            let t = random_coupling(8, 4, &mut rng);
            for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
                let g = gradient_reduced_dense(&cx, &cz, &t, loss).unwrap();
                let fd = fd_gradient(&cx, &cz, &t, loss, false);
                let num = (&g - &fd).iter().map(|v| v * v).sum::<f64>().sqrt();
                let den = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                assert!(num / den < 1e-6, "{loss:?} rel err {}", num / den);
            }
        }
    }

    #[test]
    fn gradient_zero_for_zero_target_l2() {
        use crate::affinity::{SimilarityGraph, SimilarityKind};
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cx = random_graph(5, 0.0, 1.0, &mut rng);
        let cz = SimilarityGraph::new(
            Array2::zeros((2, 2)),
            Array1::from_elem(2, 0.5),
            None,
            SimilarityKind::Custom,
        )
        .unwrap();
        let t = random_coupling(5, 2, &mut rng);
        let g = gradient_reduced(&cx, &cz, &t, DecomposableLoss::L2).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn factored_paths_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let cx = random_factored_graph(9, 3, true, &mut rng);
            let cz = random_factored_graph(4, 2, true, &mut rng);
            let t = random_coupling(9, 4, &mut rng);
            for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
                let fd = objective_reduced_dense(&cx, &cz, &t, loss).unwrap();
                let ff = objective_reduced_factored(&cx, &cz, &t, loss).unwrap();
                assert!((fd - ff).abs() < 1e-10, "{loss:?} objective {fd} vs {ff}");
                let gd = gradient_reduced_dense(&cx, &cz, &t, loss).unwrap();
                let gf = gradient_reduced_factored(&cx, &cz, &t, loss).unwrap();
                for (a, b) in gd.iter().zip(gf.iter()) {
                    assert!((a - b).abs() < 1e-10, "{loss:?} gradient {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_factored() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let cx = random_factored_graph(8, 3, true, &mut rng);
            let cz = random_factored_graph(4, 2, true, &mut rng);
            let t = random_coupling(8, 4, &mut rng);
            for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
                let g = gradient_reduced_factored(&cx, &cz, &t, loss).unwrap();
                let fd = fd_gradient(&cx, &cz, &t, loss, true);
                let num = (&g - &fd).iter().map(|v| v * v).sum::<f64>().sqrt();
                let den = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                assert!(num / den < 1e-6, "{loss:?} rel err {}", num / den);
            }
        }
    }

    #[test]
    fn oracle_basic_and_ties() {
        let g = array![[3.0, 1.0], [2.0, 5.0]];
        let h = array![0.5, 0.5];
        let x = linear_oracle(g.view(), h.view()).unwrap();
        assert_eq!(x.matrix()[[0, 1]], 0.5);
        assert_eq!(x.matrix()[[1, 0]], 0.5);
        assert_eq!(x.matrix()[[0, 0]], 0.0);

        let tied = array![[1.0, 1.0]];
        let x = linear_oracle(tied.view(), array![1.0].view()).unwrap();
        assert_eq!(x.matrix()[[0, 0]], 1.0);
        assert_eq!(x.matrix()[[0, 1]], 0.0);
    }

    #[test]
    fn oracle_beats_all_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let big_n = 4;
        let n = 3;
        let g = Array2::from_shape_fn((big_n, n), |_| rng.random_range(-2.0..2.0));
        let h = Array1::from_elem(big_n, 0.25);
        let x = linear_oracle(g.view(), h.view()).unwrap();
        let best: f64 = x.matrix().iter().zip(g.iter()).map(|(a, b)| a * b).sum();

        // Enumerate every membership vertex of the feasible polytope.
        let total = n.pow(big_n as u32);
        for code in 0..total {
            let mut c = code;
            let mut value = 0.0;
            for i in 0..big_n {
                let k = c % n;
                c /= n;
                value += h[i] * g[[i, k]];
            }
            assert!(best <= value + 1e-12);
        }
        let direct: f64 = (0..big_n)
            .map(|i| h[i] * (0..n).map(|k| g[[i, k]]).fold(f64::INFINITY, f64::min))
            .sum();
        assert!((best - direct).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn oracle_attains_rowwise_minimum(entries in proptest::collection::vec(-5.0f64..5.0, 12)) {
            let g = Array2::from_shape_vec((4, 3), entries).unwrap();
            let h = Array1::from_elem(4, 0.25);
            let x = linear_oracle(g.view(), h.view()).unwrap();
            let value: f64 = x.matrix().iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            let direct: f64 = (0..4)
                .map(|i| 0.25 * (0..3).map(|k| g[[i, k]]).fold(f64::INFINITY, f64::min))
                .sum();
            proptest::prop_assert!((value - direct).abs() < 1e-12);
            // One entry per row, equal to the row's marginal.
            for row in x.matrix().rows() {
                let nonzero = row.iter().filter(|v| **v != 0.0).count();
                proptest::prop_assert_eq!(nonzero, 1);
                proptest::prop_assert!((row.sum() - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadratic_minimizer_rules() {
        assert_eq!(minimize_quadratic_on_unit(1.0, -1.0), 0.5);
        assert_eq!(minimize_quadratic_on_unit(-2.0, 1.0), 1.0);
        assert_eq!(minimize_quadratic_on_unit(0.0, -0.5), 1.0);
        assert_eq!(minimize_quadratic_on_unit(0.0, 0.5), 0.0);
        assert_eq!(minimize_quadratic_on_unit(1.0, -4.0), 1.0);
        assert_eq!(minimize_quadratic_on_unit(1.0, 4.0), 0.0);
    }

    #[test]
    fn line_search_polynomial_matches_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..15 {
            let cx = random_graph(7, 0.05, 2.0, &mut rng);
            let cz = random_graph(3, 0.05, 2.0, &mut rng);
            let t = random_coupling(7, 3, &mut rng);
            for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
                let grad = gradient_reduced(&cx, &cz, &t, loss).unwrap();
                let x = linear_oracle(grad.view(), t.source_marginal().view()).unwrap();
                let d = &x.matrix().to_owned() - &t.matrix().to_owned();
                let (_gamma, a, b) = exact_line_search(&cx, &cz, &t, d.view(), loss).unwrap();
                let c = objective_reduced(&cx, &cz, &t, loss).unwrap();
                for &gamma in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                    let tg = Coupling::from_matrix_unchecked(
                        &t.matrix().to_owned() + &d.mapv(|v| v * gamma),
                        t.source_marginal().clone(),
                    );
                    let f = objective_reduced(&cx, &cz, &tg, loss).unwrap();
                    let poly = a * gamma * gamma + b * gamma + c;
                    assert!(
                        (f - poly).abs() < 1e-9,
                        "{loss:?} γ={gamma}: F={f} poly={poly}"
                    );
                }
            }
        }
    }
}
