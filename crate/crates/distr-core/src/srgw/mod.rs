//! Semi-relaxed Gromov-Wasserstein solvers and building blocks.
//!
//! The semi-relaxed problem drops the target-marginal constraint of GW: the
//! coupling `T` only has to satisfy `T 1_n = h` row-wise, while its column
//! sums (the prototype masses) are free. Minimizing the decomposable
//! objective over this set is what couples an input graph to a small target
//! structure, and it is the inner problem of the block-coordinate engine.
//!
//! The module provides the reduced objective `F(T)` and its gradient (dense
//! and low-rank paths), the row-separable linear oracle, the closed-form
//! quadratic line search, a conditional-gradient solver and a KL
//! mirror-descent solver, the closed-form barycenter step, and the srGW
//! divergence wrapper.

mod reduced;
mod solvers;

pub use reduced::{
    exact_line_search, gradient_reduced, gradient_reduced_dense, gradient_reduced_factored,
    linear_oracle, objective_reduced, objective_reduced_dense, objective_reduced_factored,
};
pub use solvers::{cg_solve, md_solve};

use ndarray::{Array1, Array2, ArrayView2};

use crate::affinity::SimilarityGraph;
use crate::error::{Error, Result};
use crate::loss::DecomposableLoss;
use crate::par;

/// Default relative-objective tolerance for both solvers.
pub const SOLVER_TOL: f64 = 1e-9;
/// Default iteration cap for the conditional-gradient solver.
pub const CG_MAX_ITER: usize = 2000;
/// Default iteration cap for the mirror-descent solver.
pub const MD_MAX_ITER: usize = 5000;
/// Default mirror-descent regularization.
pub const MD_EPSILON: f64 = 1.0;

/// Per-row slack accepted when validating `T 1_n = h`.
const FEAS_TOL: f64 = 1e-9;

/// A transport plan whose rows sum to the source histogram.
///
/// Columns are unconstrained; a column sum is the mass its prototype
/// receives, and zero columns (dead prototypes) are legal.
#[derive(Debug, Clone)]
pub struct Coupling {
    t: Array2<f64>,
    source_marginal: Array1<f64>,
}

impl Coupling {
    /// Validate nonnegativity and the row-sum constraint.
    pub fn new(t: Array2<f64>, source_marginal: Array1<f64>) -> Result<Self> {
        if t.nrows() != source_marginal.len() {
            return Err(Error::Contract(format!(
                "coupling has {} rows but the marginal has {} entries",
                t.nrows(),
                source_marginal.len()
            )));
        }
        if t.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Contract(
                "coupling entries must be nonnegative and finite".into(),
            ));
        }
        for (i, row) in t.rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - source_marginal[i]).abs() > FEAS_TOL {
                return Err(Error::Contract(format!(
                    "row {i} sums to {s} but the marginal is {}",
                    source_marginal[i]
                )));
            }
        }
        Ok(Self { t, source_marginal })
    }

    /// Wrap a matrix without feasibility checks.
    ///
    /// Intended for evaluating the objective at perturbed or synthetic
    /// plans (finite differences, vertex enumeration); solvers only ever
    /// produce feasible couplings.
    pub fn from_matrix_unchecked(t: Array2<f64>, source_marginal: Array1<f64>) -> Self {
        Self { t, source_marginal }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.t.view()
    }

    pub fn source_marginal(&self) -> &Array1<f64> {
        &self.source_marginal
    }

    /// Prototype masses `q = Tᵀ 1_N`.
    pub fn target_masses(&self) -> Array1<f64> {
        column_sums(self.t.view())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.t.dim()
    }
}

pub(crate) fn column_sums(t: ArrayView2<'_, f64>) -> Array1<f64> {
    let (rows, cols) = t.dim();
    let mut q = Array1::<f64>::zeros(cols);
    for i in 0..rows {
        for k in 0..cols {
            q[k] += t[[i, k]];
        }
    }
    q
}

/// Which algorithm updates the transport plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Conditional gradient (Frank-Wolfe) with exact line search.
    ConditionalGradient,
    /// Multiplicative mirror descent in the KL geometry.
    MirrorDescent,
}

/// Solver selection plus its tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Mirror-descent regularization (ignored by conditional gradient).
    pub epsilon: f64,
    /// Relative-objective stopping tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the spectral initialization of the plan.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::cg()
    }
}

impl SolverConfig {
    pub fn cg() -> Self {
        Self {
            kind: SolverKind::ConditionalGradient,
            epsilon: MD_EPSILON,
            tol: SOLVER_TOL,
            max_iter: CG_MAX_ITER,
            seed: 0,
        }
    }

    pub fn md(epsilon: f64) -> Self {
        Self {
            kind: SolverKind::MirrorDescent,
            epsilon,
            tol: SOLVER_TOL,
            max_iter: MD_MAX_ITER,
            seed: 0,
        }
    }
}

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// Relative objective change fell below tolerance.
    Converged,
    /// No descent step exists (zero step or rejected updates).
    Stationary,
    /// Iteration cap reached.
    IterationLimit,
}

/// Trace and termination data for one solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Reduced objective `F(T)` at the final plan.
    pub final_objective: f64,
    /// `F` at the initial plan and after each accepted iterate.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination_reason: TerminationReason,
}

/// The constant dropped from the reduced objective:
/// `Σ_ij f1(C_ij) h_i h_j`.
pub fn constant_term(cx: &SimilarityGraph, loss: DecomposableLoss) -> f64 {
    let c = cx.matrix();
    let h = cx.weights();
    let n = cx.size();
    par::map_sum(n, |i| {
        let mut acc = 0.0;
        for j in 0..n {
            acc += loss.f1(c[[i, j]]) * h[i] * h[j];
        }
        acc
    })
}

/// Full objective `E_L = F(T) + Σ f1(C_ij) h_i h_j`.
pub fn objective_full(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<f64> {
    Ok(objective_reduced(cx, cz, t, loss)? + constant_term(cx, loss))
}

/// Closed-form optimal target structure for a fixed plan:
/// `C̄_ij = T_:iᵀ C T_:j / (q_i q_j)`, zero where a column of `T` is null.
///
/// Satisfies the stationarity condition `C̄ ⊙ qqᵀ = Tᵀ C T`. The same
/// weighted-mean formula is optimal for both the L2 and the KL inner loss.
pub fn barycenter_step(cx: &SimilarityGraph, t: &Coupling) -> Array2<f64> {
    let tm = t.matrix();
    let n = tm.ncols();
    let q = column_sums(tm);
    let ct = par::matmul(cx.matrix(), tm);
    let m = par::matmul(tm.t(), ct.view());
    let mut cbar = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if q[i] > 0.0 && q[j] > 0.0 {
                cbar[[i, j]] = m[[i, j]] / (q[i] * q[j]);
            }
        }
    }
    // Symmetrize round-off so the result is a valid target structure.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (cbar[[i, j]] + cbar[[j, i]]);
            cbar[[i, j]] = v;
            cbar[[j, i]] = v;
        }
    }
    cbar
}

/// Semi-relaxed GW divergence between two graphs.
///
/// Runs the configured solver from the spectral initialization, and also
/// from a row-profile clustering initialization (robust to duplicated
/// nodes), keeping the lower value. Zero (up to solver tolerance) iff the
/// graphs are weakly isomorphic.
pub fn srgw_divergence(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    loss: DecomposableLoss,
    cfg: &SolverConfig,
) -> Result<(f64, Coupling)> {
    let n = cz.size();
    let solve = |t0: &Coupling| -> Result<(f64, Coupling)> {
        let (t, _report) = match cfg.kind {
            SolverKind::ConditionalGradient => cg_solve(cx, cz, loss, t0, cfg.tol, cfg.max_iter)?,
            SolverKind::MirrorDescent => {
                md_solve(cx, cz, loss, t0, cfg.epsilon, cfg.tol, cfg.max_iter)?
            }
        };
        let value = objective_full(cx, cz, &t, loss)?;
        Ok((value, t))
    };
    let spectral = crate::pipelines::spectral_coupling_init(cx, n, cfg.seed, cfg.kind)?;
    let mut best = solve(&spectral)?;
    let profile = crate::pipelines::row_profile_coupling_init(cx, n, cfg.seed, cfg.kind)?;
    let candidate = solve(&profile)?;
    if candidate.0 < best.0 {
        best = candidate;
    }
    Ok(best)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::affinity::SimilarityKind;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn barycenter_identity_coarsening() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(5, 0.0, 2.0, &mut rng);
        let h = g.weights().clone();
        let t = Coupling::new(Array2::from_diag(&h), h).unwrap();
        let cbar = barycenter_step(&g, &t);
        for (a, b) in cbar.iter().zip(g.matrix().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn barycenter_single_column_mean() {
        let g = SimilarityGraph::new(
            array![[0.0, 1.0], [1.0, 0.0]],
            array![0.5, 0.5],
            None,
            SimilarityKind::Custom,
        )
        .unwrap();
        let t = Coupling::new(array![[0.5], [0.5]], array![0.5, 0.5]).unwrap();
        let cbar = barycenter_step(&g, &t);
        assert!((cbar[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn barycenter_zero_column_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(4, 0.0, 1.0, &mut rng);
        let h = g.weights().clone();
        // Mass only on columns 0 and 2.
        let mut t = Array2::<f64>::zeros((4, 3));
        for i in 0..4 {
            t[[i, 0]] = 0.6 * h[i];
            t[[i, 2]] = 0.4 * h[i];
        }
        let t = Coupling::new(t, h).unwrap();
        let cbar = barycenter_step(&g, &t);
        for j in 0..3 {
            assert_eq!(cbar[[1, j]], 0.0);
            assert_eq!(cbar[[j, 1]], 0.0);
        }
    }

    #[test]
    fn barycenter_first_order_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_graph(6, -1.0, 2.0, &mut rng);
            let t = random_coupling(6, 3, &mut rng);
            let cbar = barycenter_step(&g, &t);
            let q = t.target_masses();
            let m = t.matrix().t().dot(&g.matrix()).dot(&t.matrix());
            for i in 0..3 {
                for j in 0..3 {
                    let lhs = cbar[[i, j]] * q[i] * q[j];
                    assert!(
                        (lhs - m[[i, j]]).abs() < 1e-10,
                        "FOC residual {} at ({i},{j})",
                        (lhs - m[[i, j]]).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn constant_term_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_graph(5, 0.1, 2.0, &mut rng);
        for loss in [DecomposableLoss::L2, DecomposableLoss::Kl] {
            let direct: f64 = (0..5)
                .flat_map(|i| (0..5).map(move |j| (i, j)))
                .map(|(i, j)| loss.f1(g.matrix()[[i, j]]) * g.weights()[i] * g.weights()[j])
                .sum();
            assert!((constant_term(&g, loss) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn barycenter_is_kl_stationary_too() {
        // The weighted-mean target also zeroes the KL first-order conditions:
        // the objective must not decrease under small symmetric perturbations.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_graph(5, 0.1, 1.5, &mut rng);
            let t = random_coupling(5, 3, &mut rng);
            let cbar = barycenter_step(&g, &t);
            let wrap = |c: Array2<f64>| {
                SimilarityGraph::new(
                    c,
                    Array1::from_elem(3, 1.0 / 3.0),
                    None,
                    SimilarityKind::Custom,
                )
                .unwrap()
            };
            let base = objective_full(&g, &wrap(cbar.clone()), &t, DecomposableLoss::Kl).unwrap();
            let eps = 1e-6;
            for i in 0..3 {
                for j in i..3 {
                    for sign in [-1.0, 1.0] {
                        let mut p = cbar.clone();
                        p[[i, j]] += sign * eps;
                        p[[j, i]] = p[[i, j]];
                        let v = objective_full(&g, &wrap(p), &t, DecomposableLoss::Kl).unwrap();
                        // Stationary: first-order change vanishes.
                        assert!(
                            v >= base - 1e-10,
                            "KL objective decreased by {} at ({i},{j})",
                            base - v
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn divergence_vanishes_for_identical_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let g = crate::affinity::student_similarity(z.view()).unwrap();
        let (value, t) =
            srgw_divergence(&g, &g, DecomposableLoss::L2, &SolverConfig::cg()).unwrap();
        assert!(value < 1e-8, "self divergence {value}");
        assert_eq!(t.shape(), (5, 5));
    }

    #[test]
    fn divergence_vanishes_for_node_split_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut base = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            for j in i..3 {
                let v = rng.random_range(0.2..1.0);
                base[[i, j]] = v;
                base[[j, i]] = v;
            }
        }
        let original = SimilarityGraph::new(
            base.clone(),
            Array1::from_elem(3, 1.0 / 3.0),
            None,
            SimilarityKind::Custom,
        )
        .unwrap();
        let src = [0usize, 0, 1, 2];
        let mut expanded = Array2::<f64>::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                expanded[[i, j]] = base[[src[i], src[j]]];
            }
        }
        let expanded = SimilarityGraph::new(
            expanded,
            Array1::from_vec(vec![1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0]),
            None,
            SimilarityKind::Custom,
        )
        .unwrap();
        let (value, _) = srgw_divergence(
            &expanded,
            &original,
            DecomposableLoss::L2,
            &SolverConfig::cg(),
        )
        .unwrap();
        assert!(value < 1e-8, "node-split divergence {value}");
    }

    #[test]
    fn divergence_upper_bounded_by_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g1 = random_graph(6, 0.1, 2.0, &mut rng);
        let g2 = random_graph(3, 0.1, 2.0, &mut rng);
        let (value, _) =
            srgw_divergence(&g1, &g2, DecomposableLoss::L2, &SolverConfig::cg()).unwrap();
        assert!(
            value > 1e-3,
            "random graphs should not look isomorphic: {value}"
        );
        for _ in 0..2000 {
            let t = random_coupling(6, 3, &mut rng);
            let sample = objective_full(&g1, &g2, &t, DecomposableLoss::L2).unwrap();
            assert!(value <= sample + 1e-9);
        }
    }
}
