//! Self-contained dense numerical primitives.
//!
//! Everything here operates on `ndarray` matrices in row-major layout and is
//! sized for desk-scale problems (N up to a few thousand): a full-spectrum
//! cyclic Jacobi eigensolver, Sinkhorn-Knopp scaling to prescribed marginals,
//! and pairwise squared Euclidean distances via the Gram expansion.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::par;

/// Default off-diagonal tolerance for [`sym_eig`].
pub const EIG_TOL: f64 = 1e-10;
/// Maximum number of cyclic Jacobi sweeps.
pub const EIG_MAX_SWEEPS: usize = 100;
/// Default residual tolerance for [`sinkhorn_normalize`].
pub const SINKHORN_TOL: f64 = 1e-9;
/// Default iteration cap for [`sinkhorn_normalize`].
pub const SINKHORN_MAX_ITER: usize = 10_000;

/// Symmetry slack accepted on eigensolver inputs.
const SYM_TOL: f64 = 1e-12;

/// Full spectrum of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Eigenvalues in descending order.
    pub eigenvalues: Array1<f64>,
    /// Orthonormal eigenvectors, one per column, matching `eigenvalues`.
    pub eigenvectors: Array2<f64>,
}

pub(crate) fn check_finite(a: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn check_symmetric(a: ArrayView2<'_, f64>, tol: f64, what: &str) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Contract(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a[[i, j]] - a[[j, i]]).abs();
            if d > tol {
                return Err(Error::Contract(format!(
                    "{what} is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {d:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps over all upper-triangle pairs, annihilating each off-diagonal
/// element with a plane rotation, until the off-diagonal Frobenius norm drops
/// below `tol`. Returns the full spectrum sorted descending with orthonormal
/// eigenvectors as columns (`A = V diag(λ) Vᵀ`).
pub fn sym_eig(a: ArrayView2<'_, f64>, tol: f64) -> Result<EigDecomposition> {
    check_finite(a, "eigensolver input")?;
    check_symmetric(a, SYM_TOL, "eigensolver input")?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Contract("eigensolver input is empty".into()));
    }

    // Work on the symmetrized copy so round-off asymmetry cannot drift.
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut v = Array2::<f64>::eye(n);

    let off_norm = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[[i, j]] * m[[i, j]];
                }
            }
        }
        s.sqrt()
    };

    let mut residual = off_norm(&m);
    let mut converged = residual < tol;
    for _sweep in 0..EIG_MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Rotation angle from Numerical Recipes §11.1.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_ = t * c;
                let tau = s_ / (1.0 + c);

                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[[k, p]];
                        let akq = m[[k, q]];
                        m[[k, p]] = akp - s_ * (akq + tau * akp);
                        m[[k, q]] = akq + s_ * (akp - tau * akq);
                        m[[p, k]] = m[[k, p]];
                        m[[q, k]] = m[[k, q]];
                    }
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp - s_ * (vkq + tau * vkp);
                    v[[k, q]] = vkq + s_ * (vkp - tau * vkq);
                }
            }
        }
        residual = off_norm(&m);
        converged = residual < tol;
    }
    if !converged {
        return Err(Error::IterationLimit {
            what: "Jacobi eigensolver",
            iterations: EIG_MAX_SWEEPS,
            residual,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .expect("finite eigenvalues")
    });
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&v.column(src));
    }
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Scale a nonnegative matrix to prescribed row and column marginals.
///
/// Returns `diag(u) K diag(v)` with row sums equal to `row_marginal` and
/// column sums equal to `col_marginal` within `tol` (maximum absolute
/// residual). The zero pattern of `K` is preserved.
pub fn sinkhorn_normalize(
    k: ArrayView2<'_, f64>,
    row_marginal: ArrayView1<'_, f64>,
    col_marginal: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array2<f64>> {
    let (rows, cols) = k.dim();
    if row_marginal.len() != rows || col_marginal.len() != cols {
        return Err(Error::Contract(format!(
            "marginal lengths ({}, {}) do not match kernel shape {}x{}",
            row_marginal.len(),
            col_marginal.len(),
            rows,
            cols
        )));
    }
    check_finite(k, "Sinkhorn kernel")?;
    if k.iter().any(|&x| x < 0.0) {
        return Err(Error::Contract(
            "Sinkhorn kernel has negative entries".into(),
        ));
    }
    let r_total: f64 = row_marginal.sum();
    let c_total: f64 = col_marginal.sum();
    if (r_total - c_total).abs() > 1e-9 * r_total.max(1.0) {
        return Err(Error::Contract(format!(
            "marginal totals differ: {r_total} vs {c_total}"
        )));
    }
    for i in 0..rows {
        if k.row(i).sum() == 0.0 && row_marginal[i] > 0.0 {
            return Err(Error::Infeasible(format!(
                "row {i} of the kernel is all zero"
            )));
        }
    }
    for j in 0..cols {
        if k.column(j).sum() == 0.0 && col_marginal[j] > 0.0 {
            return Err(Error::Infeasible(format!(
                "column {j} of the kernel is all zero"
            )));
        }
    }

    let mut u = Array1::<f64>::ones(rows);
    let mut v = Array1::<f64>::ones(cols);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        // u = r / (K v), v = c / (Kᵀ u)
        let kv = k.dot(&v);
        for i in 0..rows {
            if kv[i] > 0.0 {
                u[i] = row_marginal[i] / kv[i];
            } else if row_marginal[i] > 0.0 {
                return Err(Error::Infeasible(format!(
                    "zero pattern makes row {i} unreachable"
                )));
            } else {
                u[i] = 0.0;
            }
        }
        let ktu = k.t().dot(&u);
        for j in 0..cols {
            if ktu[j] > 0.0 {
                v[j] = col_marginal[j] / ktu[j];
            } else if col_marginal[j] > 0.0 {
                return Err(Error::Infeasible(format!(
                    "zero pattern makes column {j} unreachable"
                )));
            } else {
                v[j] = 0.0;
            }
        }
        if !u.iter().all(|x| x.is_finite()) || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Infeasible("scaling vectors diverged".into()));
        }

        // Row sums are exact right after the u-update; check columns.
        let col_res = {
            let ktu = k.t().dot(&u);
            let mut worst = 0.0f64;
            for j in 0..cols {
                worst = worst.max((ktu[j] * v[j] - col_marginal[j]).abs());
            }
            worst
        };
        let row_res = {
            let kv = k.dot(&v);
            let mut worst = 0.0f64;
            for i in 0..rows {
                worst = worst.max((u[i] * kv[i] - row_marginal[i]).abs());
            }
            worst
        };
        residual = row_res.max(col_res);
        if residual < tol {
            let mut out = k.to_owned();
            for i in 0..rows {
                for j in 0..cols {
                    out[[i, j]] *= u[i] * v[j];
                }
            }
            return Ok(out);
        }
    }
    Err(Error::IterationLimit {
        what: "Sinkhorn scaling",
        iterations: max_iter,
        residual,
    })
}

/// Pairwise squared Euclidean distances between the rows of `x`.
///
/// Uses the Gram expansion `‖xi‖² + ‖xj‖² − 2⟨xi,xj⟩`, clamping small
/// negative round-off to zero. The result is symmetric with a zero diagonal.
pub fn pairwise_sqdist(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_finite(x, "pairwise distance input")?;
    let n = x.nrows();
    let gram = par::matmul(x, x.t());
    let norms: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
    let mut d = Array2::<f64>::zeros((n, n));
    {
        let buf = d.as_slice_mut().expect("contiguous");
        par::for_each_row(buf, n, |i, row| {
            for j in 0..n {
                let v = norms[i] + norms[j] - 2.0 * gram[[i, j]];
                row[j] = if v > 0.0 { v } else { 0.0 };
            }
            row[i] = 0.0;
        });
    }
    // Exact symmetry despite round-off in the Gram products.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (d[[i, j]] + d[[j, i]]);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

/// Columns of `x` restricted to the top-`k` eigenpairs: `(√λ₁ v₁, …, √λₖ vₖ)`.
///
/// Negative trailing eigenvalues are treated as zero directions.
pub fn spectral_embedding_top(eig: &EigDecomposition, k: usize) -> Array2<f64> {
    let n = eig.eigenvectors.nrows();
    let k = k.min(eig.eigenvalues.len());
    let mut z = Array2::<f64>::zeros((n, k));
    for j in 0..k {
        let lam = eig.eigenvalues[j].max(0.0);
        let scale = lam.sqrt();
        let col = eig.eigenvectors.slice(s![.., j]);
        z.column_mut(j).assign(&col.mapv(|v| v * scale));
    }
    z
}
