//! Decomposable inner losses and the exact quadruple-sum GW objective.
//!
//! Both supported losses split as `L(a,b) = f1(a) + f2(b) − h1(a) h2(b)`,
//! which is what makes the reduced objective in [`crate::srgw`] cheap to
//! evaluate. The quadruple loop here is deliberately naive; it exists as the
//! ground-truth oracle the fast paths are tested against.

use crate::affinity::SimilarityGraph;
use crate::error::{Error, Result};
use crate::par;
use crate::srgw::Coupling;

/// Floor applied inside `h2 = log` so a validated-positive matrix cannot
/// underflow to `-inf` mid-iteration.
const KL_LOG_FLOOR: f64 = 1e-30;

/// An inner loss with the decomposition `L(a,b) = f1(a) + f2(b) − h1(a)h2(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecomposableLoss {
    /// `(a − b)²` → `f1(a)=a²`, `f2(b)=b²`, `h1(a)=a`, `h2(b)=2b`.
    L2,
    /// `a log(a/b) − a + b` → `f1(a)=a log a − a`, `f2(b)=b`, `h1(a)=a`,
    /// `h2(b)=log b`; requires `a ≥ 0`, `b > 0`.
    Kl,
}

impl DecomposableLoss {
    pub fn f1(self, a: f64) -> f64 {
        match self {
            DecomposableLoss::L2 => a * a,
            DecomposableLoss::Kl => {
                if a == 0.0 {
                    0.0
                } else {
                    a * a.ln() - a
                }
            }
        }
    }

    pub fn f2(self, b: f64) -> f64 {
        match self {
            DecomposableLoss::L2 => b * b,
            DecomposableLoss::Kl => b,
        }
    }

    pub fn h1(self, a: f64) -> f64 {
        match self {
            DecomposableLoss::L2 => a,
            DecomposableLoss::Kl => a,
        }
    }

    pub fn h2(self, b: f64) -> f64 {
        match self {
            DecomposableLoss::L2 => 2.0 * b,
            DecomposableLoss::Kl => b.max(KL_LOG_FLOOR).ln(),
        }
    }

    /// Check that every entry of a target structure lies in the loss domain.
    pub(crate) fn check_target_domain(self, c: ndarray::ArrayView2<'_, f64>) -> Result<()> {
        if self == DecomposableLoss::Kl {
            if let Some(v) = c.iter().find(|v| **v <= 0.0) {
                return Err(Error::Domain(format!(
                    "KL loss requires strictly positive target similarities, found {v}"
                )));
            }
        }
        Ok(())
    }

    /// Check a source-side value.
    pub(crate) fn check_source_domain(self, c: ndarray::ArrayView2<'_, f64>) -> Result<()> {
        if self == DecomposableLoss::Kl {
            if let Some(v) = c.iter().find(|v| **v < 0.0) {
                return Err(Error::Domain(format!(
                    "KL loss requires nonnegative source similarities, found {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate `L(a, b)` through the direct formula, with domain errors.
pub fn loss_eval(loss: DecomposableLoss, a: f64, b: f64) -> Result<f64> {
    match loss {
        DecomposableLoss::L2 => Ok((a - b) * (a - b)),
        DecomposableLoss::Kl => {
            if a < 0.0 {
                return Err(Error::Domain(format!("KL loss needs a ≥ 0, got a = {a}")));
            }
            if b <= 0.0 {
                return Err(Error::Domain(format!("KL loss needs b > 0, got b = {b}")));
            }
            if a == 0.0 {
                Ok(b)
            } else {
                Ok(a * (a / b).ln() - a + b)
            }
        }
    }
}

/// The exact GW objective `Σ_{ijkl} L(Cx_ij, Cz_kl) T_ik T_jl`.
///
/// Quadruple loop; only suitable as an oracle for tiny instances.
pub fn gw_objective_bruteforce(
    cx: &SimilarityGraph,
    cz: &SimilarityGraph,
    t: &Coupling,
    loss: DecomposableLoss,
) -> Result<f64> {
    let big_n = cx.size();
    let n = cz.size();
    let tm = t.matrix();
    if tm.nrows() != big_n || tm.ncols() != n {
        return Err(Error::Contract(format!(
            "coupling shape {}x{} does not match graphs {big_n}x{n}",
            tm.nrows(),
            tm.ncols()
        )));
    }
    loss.check_source_domain(cx.matrix())?;
    loss.check_target_domain(cz.matrix())?;

    let c = cx.matrix();
    let cbar = cz.matrix();
    let total = par::map_sum(big_n, |i| {
        let mut acc = 0.0;
        for j in 0..big_n {
            let a = c[[i, j]];
            for k in 0..n {
                let tik = tm[[i, k]];
                if tik == 0.0 {
                    continue;
                }
                for l in 0..n {
                    let w = tik * tm[[j, l]];
                    if w == 0.0 {
                        continue;
                    }
                    // Domain already validated; direct formula.
                    let b = cbar[[k, l]];
                    let val = match loss {
                        DecomposableLoss::L2 => (a - b) * (a - b),
                        DecomposableLoss::Kl => {
                            if a == 0.0 {
                                b
                            } else {
                                a * (a / b).ln() - a + b
                            }
                        }
                    };
                    acc += val * w;
                }
            }
        }
        acc
    });
    Ok(total)
}
