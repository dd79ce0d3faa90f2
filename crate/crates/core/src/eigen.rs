//! Estimation of the spectral lower bound delta = lambda_min of the
//! generalized eigenproblem K v = lambda M v by inverse power iteration,
//! plus the delta-selection policy used by the robustness studies.

use crate::error::{Error, Result};
use crate::fem::m_norm;
use crate::sparse::{cg_solve, dot, norm2, SparseMatrix};

/// Residual tolerance the callers use unless they have a reason not to.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
/// Iteration cap for [`min_eigen`].
pub const DEFAULT_EIGEN_MAX_ITER: usize = 500;
/// The inner CG solves run tighter than the outer residual so delta is never
/// the accuracy bottleneck.
const INNER_CG_TOL: f64 = 1e-12;

/// Smallest generalized eigenpair of (K, M).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda_min: f64,
    /// M-normalized eigenvector, v^T M v = 1.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    /// ||K v - lambda M v|| / ||K v||.
    pub residual: f64,
}

/// How the scheme obtains delta: the computed lambda_min, a fraction of it,
/// or a user-supplied value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    Computed,
    Scaled(f64),
    Fixed(f64),
}

/// Inverse power iteration on the pencil (K, M): repeat v <- K^{-1} M v with
/// an inner CG solve, M-normalize, take the Rayleigh quotient, stop when the
/// eigen-residual drops below `tol`. The start vector is all-ones, which has
/// nonzero overlap with the ground mode of these positive operators and makes
/// iteration counts reproducible.
pub fn min_eigen(
    stiffness: &SparseMatrix,
    mass: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult> {
    if stiffness.n() != mass.n() {
        return Err(Error::DimensionMismatch {
            expected: stiffness.n(),
            found: mass.n(),
        });
    }
    let n = stiffness.n();
    let mut v = vec![1.0; n];
    let scale = m_norm(mass, &v)?;
    for x in &mut v {
        *x /= scale;
    }
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let rhs = mass.spmv(&v)?;
        let (mut y, report) = cg_solve(stiffness, &rhs, INNER_CG_TOL, 10 * n.max(10))?;
        report.require_converged("inner CG solve in min_eigen")?;
        let y_norm = m_norm(mass, &y)?;
        for x in &mut y {
            *x /= y_norm;
        }
        let ky = stiffness.spmv(&y)?;
        let my = mass.spmv(&y)?;
        let lambda = dot(&y, &ky) / dot(&y, &my);
        let defect: Vec<f64> = ky.iter().zip(&my).map(|(k, m)| k - lambda * m).collect();
        residual = norm2(&defect) / norm2(&ky);
        v = y;
        if residual <= tol {
            return Ok(EigenResult {
                lambda_min: lambda,
                eigenvector: v,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        what: "inverse power iteration",
        iterations: max_iter,
        residual,
    })
}

/// Applies the delta policy. The result must satisfy delta <= lambda_min or
/// D = K - delta*M would be indefinite, so any policy is checked against the
/// eigenvalue estimate when one is available; `Computed` and `Scaled` require
/// one.
pub fn resolve_delta(policy: &DeltaPolicy, eig: Option<&EigenResult>) -> Result<f64> {
    let delta = match (policy, eig) {
        (DeltaPolicy::Computed, Some(eig)) => eig.lambda_min,
        (DeltaPolicy::Scaled(factor), Some(eig)) => {
            if !factor.is_finite() || *factor <= 0.0 || *factor > 1.0 {
                return Err(Error::InvalidParameter {
                    name: "delta-scale",
                    message: format!("scale factor must lie in (0, 1], got {factor}"),
                });
            }
            factor * eig.lambda_min
        }
        (DeltaPolicy::Computed | DeltaPolicy::Scaled(_), None) => {
            return Err(Error::InvalidParameter {
                name: "delta policy",
                message: "computed/scaled policies need an eigenvalue estimate".into(),
            })
        }
        (DeltaPolicy::Fixed(value), _) => *value,
    };
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            message: format!("delta must be positive, got {delta}"),
        });
    }
    if let Some(eig) = eig {
        if delta > eig.lambda_min * (1.0 + 1e-8) {
            return Err(Error::DeltaTooLarge {
                delta,
                lambda_min: eig.lambda_min,
            });
        }
    }
    Ok(delta)
}
