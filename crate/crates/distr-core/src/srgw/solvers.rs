//! Conditional-gradient and mirror-descent solvers for the semi-relaxed
//! problem `min F(T)` over `{T ≥ 0, T 1_n = h}`.

use ndarray::{Array1, Array2};

use crate::affinity::SimilarityGraph;
use crate::error::{Error, Result};
use crate::loss::DecomposableLoss;

use super::reduced::{linear_oracle, minimize_quadratic_on_unit, DenseOps};
use super::{Coupling, SolverReport, TerminationReason};

/// Relative change of the objective between two iterates.
fn relative_change(prev: f64, next: f64) -> f64 {
    (prev - next).abs() / prev.abs().max(1e-16)
}

/// Conditional gradient (Frank-Wolfe) with exact line search.
///
/// Iterates gradient → linear oracle → closed-form step until the relative
/// objective decrease drops below `tol`. Every iterate is a convex
/// combination of feasible plans, so feasibility is maintained exactly and
/// the objective trace is non-increasing.
pub fn cg_solve(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    loss: DecomposableLoss,
    t0: &Coupling,
    tol: f64,
    max_iter: usize,
) -> Result<(Coupling, SolverReport)> {
    let (rows, cols) = t0.shape();
    if rows != cx.size() || cols != cz.size() {
        return Err(Error::Contract(
            "initial plan shape does not match the graphs".into(),
        ));
    }
    let ops = DenseOps::new(cx, cz, loss)?;
    let h = t0.source_marginal().clone();

    if cols == 1 {
        // U_1(h) is a singleton: the plan is forced.
        let t = Array2::from_shape_fn((rows, 1), |(i, _)| h[i]);
        let f = ops.objective(t.view());
        let t = Coupling::from_matrix_unchecked(t, h);
        return Ok((
            t,
            SolverReport {
                final_objective: f,
                objective_trace: vec![f],
                iterations: 0,
                converged: true,
                termination_reason: TerminationReason::Converged,
            },
        ));
    }

    let mut t = t0.matrix().to_owned();
    let mut f = ops.objective(t.view());
    let mut trace = vec![f];
    let mut reason = TerminationReason::IterationLimit;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let grad = ops.gradient(t.view());
        let x = linear_oracle(grad.view(), h.view())?;
        let d = &x.matrix().to_owned() - &t;
        let (a, b) = ops.line_coefficients(t.view(), d.view());
        let gamma = minimize_quadratic_on_unit(a, b);
        // Move only on a real predicted decrease; at a minimizer the
        // coefficients are zero up to round-off and a concave-endpoint jump
        // would land on an arbitrary vertex.
        let predicted = a * gamma * gamma + b * gamma;
        if gamma == 0.0 || predicted >= -1e-14 * (1.0 + f.abs()) {
            reason = TerminationReason::Stationary;
            break;
        }
        // Convex combination keeps the iterate exactly feasible.
        t.zip_mut_with(&x.matrix(), |ti, &xi| {
            *ti = (1.0 - gamma) * *ti + gamma * xi
        });
        let f_new = ops.objective(t.view());
        trace.push(f_new);
        let rel = relative_change(f, f_new);
        f = f_new;
        if rel < tol {
            reason = TerminationReason::Converged;
            break;
        }
    }
    let converged = reason != TerminationReason::IterationLimit;
    Ok((
        Coupling::from_matrix_unchecked(t, h),
        SolverReport {
            final_objective: f,
            objective_trace: trace,
            iterations,
            converged,
            termination_reason: reason,
        },
    ))
}

/// Number of step-halving retries before mirror descent declares itself
/// stationary.
const MD_MAX_BACKTRACKS: usize = 40;

/// Mirror descent in the KL geometry.
///
/// Each iteration applies the multiplicative update
/// `K = T ⊙ exp(−∇F(T)/ε)` followed by exact row rescaling to `h` (the KL
/// projection onto the row-constraint set). Overflow is guarded by
/// subtracting each row's largest exponent. If a step would increase the
/// objective the proximal weight ε is doubled for that step, so the accepted
/// trace is non-increasing.
pub fn md_solve(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    loss: DecomposableLoss,
    t0: &Coupling,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Coupling, SolverReport)> {
    let (rows, cols) = t0.shape();
    if rows != cx.size() || cols != cz.size() {
        return Err(Error::Contract(
            "initial plan shape does not match the graphs".into(),
        ));
    }
    if epsilon <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if t0.matrix().iter().any(|&v| v <= 0.0) {
        return Err(Error::Contract(
            "mirror descent requires a strictly positive initial plan".into(),
        ));
    }
    let ops = DenseOps::new(cx, cz, loss)?;
    let h = t0.source_marginal().clone();

    let mut t = t0.matrix().to_owned();
    let mut f = ops.objective(t.view());
    let mut trace = vec![f];
    let mut reason = TerminationReason::IterationLimit;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let grad = ops.gradient(t.view());

        let mut accepted = None;
        let mut eps_step = epsilon;
        for _ in 0..=MD_MAX_BACKTRACKS {
            let candidate = kl_step(&t, &grad, &h, eps_step);
            let f_new = ops.objective(candidate.view());
            if f_new <= f {
                accepted = Some((candidate, f_new));
                break;
            }
            eps_step *= 2.0;
        }
        let Some((t_new, f_new)) = accepted else {
            reason = TerminationReason::Stationary;
            break;
        };
        t = t_new;
        trace.push(f_new);
        let rel = relative_change(f, f_new);
        f = f_new;
        if rel < tol {
            reason = TerminationReason::Converged;
            break;
        }
    }
    let converged = reason != TerminationReason::IterationLimit;
    Ok((
        Coupling::from_matrix_unchecked(t, h),
        SolverReport {
            final_objective: f,
            objective_trace: trace,
            iterations,
            converged,
            termination_reason: reason,
        },
    ))
}

/// One multiplicative update plus the exact row projection.
fn kl_step(t: &Array2<f64>, grad: &Array2<f64>, h: &Array1<f64>, epsilon: f64) -> Array2<f64> {
    let (rows, cols) = t.dim();
    let mut out = Array2::<f64>::zeros((rows, cols));
    for i in 0..rows {
        // Stabilize: subtract the row max of −∇F/ε before exponentiating.
        let mut m = f64::NEG_INFINITY;
        for k in 0..cols {
            m = m.max(-grad[[i, k]] / epsilon);
        }
        let mut sum = 0.0;
        for k in 0..cols {
            let v = t[[i, k]] * (-grad[[i, k]] / epsilon - m).exp();
            out[[i, k]] = v;
            sum += v;
        }
        let scale = h[i] / sum;
        for k in 0..cols {
            out[[i, k]] *= scale;
        }
    }
    out
}
