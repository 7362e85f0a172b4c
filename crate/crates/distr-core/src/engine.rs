//! Block-coordinate descent for the joint reduction problem.
//!
//! One outer iteration alternates two blocks: the transport plan is solved
//! to tolerance by a semi-relaxed GW solver for the current embedding
//! similarity `C_Z(Z)`, then the prototype positions `Z` take a budget of
//! adaptive gradient steps with the plan held fixed. The plan-dependent
//! pieces of the embedding gradient (`Tᵀ C T` and the prototype masses) are
//! constant inside the inner loop, so they are computed once per outer
//! iteration.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::affinity::{self, SimilarityGraph};
use crate::error::{Error, Result};
use crate::loss::DecomposableLoss;
use crate::pipelines::spectral_coupling_init;
use crate::srgw::{
    cg_solve, constant_term, md_solve, objective_reduced, Coupling, SolverConfig, SolverKind,
};

/// Default Adam step count per outer iteration.
pub const DEFAULT_N_INNER: usize = 100;
/// Default Adam learning rate.
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
/// Default relative-objective tolerance for the outer loop.
pub const DEFAULT_OUTER_TOL: f64 = 1e-7;
/// Default outer iteration cap.
pub const DEFAULT_MAX_OUTER: usize = 50;
/// Default column-mass threshold for counting live prototypes.
pub const DEFAULT_MASS_THRESHOLD: f64 = 1e-4;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Embedding-side similarity kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `C_Z = Z Zᵀ`.
    Gram,
    /// Scalar-normalized Student-t kernel.
    Student,
}

/// Input-side similarity kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CxKind {
    Gram,
    MdsGram,
    EntropicAffinity,
}

/// Prototype positions plus the optimizer state that travels with them.
#[derive(Debug, Clone)]
pub struct EmbeddingState {
    pub z: Array2<f64>,
    pub kernel_kind: KernelKind,
    first_moment: Array2<f64>,
    second_moment: Array2<f64>,
    step_count: usize,
    pub learning_rate: f64,
}

impl EmbeddingState {
    pub fn new(z: Array2<f64>, kernel_kind: KernelKind, learning_rate: f64) -> Self {
        let shape = z.dim();
        Self {
            z,
            kernel_kind,
            first_moment: Array2::zeros(shape),
            second_moment: Array2::zeros(shape),
            step_count: 0,
            learning_rate,
        }
    }
}

/// Everything `distr_fit` needs to run.
#[derive(Debug, Clone)]
pub struct DistrConfig {
    pub cx_kind: CxKind,
    pub cz_kind: KernelKind,
    pub loss: DecomposableLoss,
    /// Number of prototypes.
    pub n: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Perplexity for the entropic affinity input kind.
    pub perplexity: f64,
    pub solver: SolverConfig,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub n_inner: usize,
    pub learning_rate: f64,
    pub mass_threshold: f64,
    pub seed: u64,
}

impl Default for DistrConfig {
    fn default() -> Self {
        Self {
            cx_kind: CxKind::EntropicAffinity,
            cz_kind: KernelKind::Student,
            loss: DecomposableLoss::Kl,
            n: 10,
            d: 2,
            perplexity: 30.0,
            solver: SolverConfig::cg(),
            outer_tol: DEFAULT_OUTER_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            n_inner: DEFAULT_N_INNER,
            learning_rate: DEFAULT_LEARNING_RATE,
            mass_threshold: DEFAULT_MASS_THRESHOLD,
            seed: 0,
        }
    }
}

/// Output of one fit.
#[derive(Debug, Clone)]
pub struct DistrResult {
    /// Final prototype positions, `n × d`.
    pub z: Array2<f64>,
    /// Prototype masses `h_Z = Tᵀ 1_N`.
    pub h_z: Array1<f64>,
    /// Final coupling.
    pub coupling: Coupling,
    /// Full objective after the initialization and each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Number of prototypes whose mass clears the threshold.
    pub effective_n: usize,
    /// Indices of those prototypes.
    pub kept_columns: Vec<usize>,
}

/// Build the embedding similarity for the current prototypes.
pub fn build_cz(kind: KernelKind, z: ArrayView2<'_, f64>) -> Result<SimilarityGraph> {
    match kind {
        KernelKind::Gram => affinity::linear_gram(z),
        KernelKind::Student => affinity::student_similarity(z),
    }
}

/// Build the input similarity for a dataset.
pub fn build_cx(kind: CxKind, x: ArrayView2<'_, f64>, perplexity: f64) -> Result<SimilarityGraph> {
    match kind {
        CxKind::Gram => affinity::linear_gram(x),
        CxKind::MdsGram => {
            let d = crate::numkit::pairwise_sqdist(x)?;
            affinity::mds_gram(d.view())
        }
        CxKind::EntropicAffinity => {
            affinity::entropic_affinity(x, perplexity, affinity::ENTROPY_TOL)
        }
    }
}

/// Gradient of `⟨G, C_Z(Z)⟩` with respect to `Z`.
pub fn kernel_vjp(
    kernel_kind: KernelKind,
    z: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let n = z.nrows();
    if g.dim() != (n, n) {
        return Err(Error::Contract("upstream gradient must be n×n".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("upstream gradient must be finite".into()));
    }
    match kernel_kind {
        KernelKind::Gram => {
            // ∇_Z ⟨G, Z Zᵀ⟩ = (G + Gᵀ) Z
            let sym = &g.to_owned() + &g.t().to_owned();
            Ok(sym.dot(&z))
        }
        KernelKind::Student => {
            let (k, s) = affinity::student_kernel_parts(z)?;
            let gk: f64 = g.iter().zip(k.iter()).map(|(a, b)| a * b).sum();
            let shift = gk / (s * s);
            // H = G/s − (⟨G,K⟩/s²) 11ᵀ, then chain through K entries:
            // ∂K_jl/∂z_j = −K_jl² · 2 (z_j − z_l).
            let mut p = Array2::<f64>::zeros((n, n));
            for j in 0..n {
                for l in 0..n {
                    let hjl = g[[j, l]] / s - shift;
                    let hlj = g[[l, j]] / s - shift;
                    p[[j, l]] = 2.0 * (hjl + hlj) * k[[j, l]] * k[[j, l]];
                }
            }
            // ∇_{z_j} = Σ_l p_jl (z_l − z_j)
            let pz = p.dot(&z);
            let row_sums: Vec<f64> = (0..n).map(|j| p.row(j).sum()).collect();
            let mut out = pz;
            for j in 0..n {
                for c in 0..z.ncols() {
                    out[[j, c]] -= row_sums[j] * z[[j, c]];
                }
            }
            Ok(out)
        }
    }
}

/// Gradient of the full objective with respect to the target structure `C̄`.
fn objective_cbar_gradient(
    loss: DecomposableLoss,
    cbar: &Array2<f64>,
    q: &Array1<f64>,
    tct: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = cbar.nrows();
    let mut g = Array2::<f64>::zeros((n, n));
    match loss {
        DecomposableLoss::L2 => {
            for i in 0..n {
                for j in 0..n {
                    g[[i, j]] = 2.0 * (cbar[[i, j]] * q[i] * q[j] - tct[[i, j]]);
                }
            }
        }
        DecomposableLoss::Kl => {
            for i in 0..n {
                for j in 0..n {
                    let b = cbar[[i, j]];
                    if b <= 0.0 {
                        return Err(Error::Domain(
                            "KL loss requires a strictly positive target similarity".into(),
                        ));
                    }
                    g[[i, j]] = q[i] * q[j] - tct[[i, j]] / b;
                }
            }
        }
    }
    Ok(g)
}

/// Run `n_inner` adaptive gradient steps on the prototypes, plan held fixed.
pub fn z_step(
    cx: &SimilarityGraph,
    t: &Coupling,
    mut state: EmbeddingState,
    loss: DecomposableLoss,
    n_inner: usize,
) -> Result<EmbeddingState> {
    let tm = t.matrix();
    if tm.nrows() != cx.size() {
        return Err(Error::Contract(
            "plan does not match the input graph".into(),
        ));
    }
    if tm.ncols() != state.z.nrows() {
        return Err(Error::Contract(
            "plan does not match the prototype count".into(),
        ));
    }
    // Plan-dependent pieces are constant inside the inner loop.
    let q = t.target_masses();
    let ct = crate::par::matmul(cx.matrix(), tm);
    let tct = crate::par::matmul(tm.t(), ct.view());

    for _ in 0..n_inner {
        let cz = build_cz(state.kernel_kind, state.z.view())?;
        let cbar = cz.matrix().to_owned();
        let dcbar = objective_cbar_gradient(loss, &cbar, &q, &tct)?;
        let grad = kernel_vjp(state.kernel_kind, state.z.view(), dcbar.view())?;

        state.step_count += 1;
        let bias1 = 1.0 - ADAM_BETA1.powi(state.step_count as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(state.step_count as i32);
        let lr = state.learning_rate;
        for ((zv, m), (v, gv)) in state
            .z
            .iter_mut()
            .zip(state.first_moment.iter_mut())
            .zip(state.second_moment.iter_mut().zip(grad.iter()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gv;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gv * gv;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *zv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        if state.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("prototype positions diverged".into()));
        }
    }
    Ok(state)
}

/// Per-sample positions induced by a plan: row `i` is the `T`-weighted mean
/// of the prototypes, `diag(h)^{-1} T Z`. For a membership plan this is the
/// assigned prototype itself.
pub fn barycentric_projection(t: &Coupling, z: ArrayView2<'_, f64>) -> Array2<f64> {
    let tm = t.matrix();
    let h = t.source_marginal();
    let mut y = tm.dot(&z);
    for (i, mut row) in y.rows_mut().into_iter().enumerate() {
        if h[i] > 0.0 {
            row.mapv_inplace(|v| v / h[i]);
        }
    }
    y
}

/// Report which prototype columns carry mass at or above the threshold.
/// The plan itself is left untouched.
pub fn prune_report(t: &Coupling, mass_threshold: f64) -> (usize, Vec<usize>) {
    let masses = t.target_masses();
    let kept: Vec<usize> = masses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= mass_threshold)
        .map(|(k, _)| k)
        .collect();
    (kept.len(), kept)
}

fn validate_config(config: &DistrConfig, big_n: usize) -> Result<()> {
    if config.n == 0 || config.n > big_n {
        return Err(Error::Config(format!(
            "prototype count must satisfy 1 ≤ n ≤ N={big_n}, got {}",
            config.n
        )));
    }
    if config.d == 0 {
        return Err(Error::Config(
            "embedding dimension must be at least 1".into(),
        ));
    }
    if config.loss == DecomposableLoss::Kl {
        if config.cx_kind != CxKind::EntropicAffinity {
            return Err(Error::Config(
                "KL loss needs a nonnegative input similarity; use the entropic affinity".into(),
            ));
        }
        if config.cz_kind != KernelKind::Student {
            return Err(Error::Config(
                "KL loss needs a strictly positive embedding similarity; use the Student kernel"
                    .into(),
            ));
        }
    }
    Ok(())
}

/// Floor mirror-descent warm starts away from exact zeros. The shift is far
/// below the 1e-9 trace slack.
fn ensure_strictly_positive(t: &Coupling) -> Coupling {
    let tm = t.matrix();
    if tm.iter().all(|&v| v > 0.0) {
        return t.clone();
    }
    let h = t.source_marginal().clone();
    let cols = tm.ncols();
    let mut out = tm.to_owned();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let floor = h[i] * 1e-15 / cols as f64;
        for v in row.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
        let s = row.sum();
        let scale = h[i] / s;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Coupling::from_matrix_unchecked(out, h)
}

/// Fit the joint reduction model.
///
/// Builds the input graph, initializes the prototypes from a standard normal
/// draw and the plan from spectral clustering, then alternates plan solves
/// and embedding steps until the relative change of the full objective drops
/// below `outer_tol`. The recorded trace is non-increasing: an embedding
/// block that fails to improve the objective is rolled back.
pub fn distr_fit(x: ArrayView2<'_, f64>, config: &DistrConfig) -> Result<DistrResult> {
    let big_n = x.nrows();
    validate_config(config, big_n)?;
    let cx = build_cx(config.cx_kind, x, config.perplexity)?;
    let constant = constant_term(&cx, config.loss);

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let normal = StandardNormal;
    let z0 = Array2::from_shape_fn((config.n, config.d), |_| normal.sample(&mut rng));
    let mut state = EmbeddingState::new(z0, config.cz_kind, config.learning_rate);

    let mut t = spectral_coupling_init(&cx, config.n, config.seed, config.solver.kind)?;

    let mut cz = build_cz(config.cz_kind, state.z.view())?;
    let mut objective = objective_reduced(&cx, &cz, &t, config.loss)? + constant;
    let mut trace = vec![objective];

    for _outer in 0..config.max_outer {
        // Embedding block first, then the plan: adaptive steps are rolled
        // back if they overshoot, so the trace never increases.
        let snapshot = state.clone();
        state = z_step(&cx, &t, state, config.loss, config.n_inner)?;
        let cz_new = build_cz(config.cz_kind, state.z.view())?;
        let after_embed = objective_reduced(&cx, &cz_new, &t, config.loss)? + constant;
        if after_embed <= objective {
            cz = cz_new;
        } else {
            state = snapshot;
        }

        // Plan block: warm-started solve, monotone by construction.
        let (t_new, _report) = match config.solver.kind {
            SolverKind::ConditionalGradient => cg_solve(
                &cx,
                &cz,
                config.loss,
                &t,
                config.solver.tol,
                config.solver.max_iter,
            )?,
            SolverKind::MirrorDescent => {
                let warm = ensure_strictly_positive(&t);
                md_solve(
                    &cx,
                    &cz,
                    config.loss,
                    &warm,
                    config.solver.epsilon,
                    config.solver.tol,
                    config.solver.max_iter,
                )?
            }
        };
        t = t_new;
        let new_objective = objective_reduced(&cx, &cz, &t, config.loss)? + constant;

        trace.push(new_objective);
        let rel = (objective - new_objective).abs() / objective.abs().max(1e-16);
        objective = new_objective;
        if rel < config.outer_tol {
            break;
        }
    }

    let h_z = t.target_masses();
    let (effective_n, kept_columns) = prune_report(&t, config.mass_threshold);
    Ok(DistrResult {
        z: state.z,
        h_z,
        coupling: t,
        objective_trace: trace,
        effective_n,
        kept_columns,
    })
}
