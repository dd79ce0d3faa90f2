//! Dense spectral reference: the exact discrete solution
//! u* = A_h^{-alpha} f of the Galerkin pair (K, M), computed by full
//! generalized eigendecomposition. This is the ground truth the convergence
//! tests measure the time stepper against; it is never the production path.
//!
//! Pipeline: dense Cholesky M = L L^T, cyclic Jacobi rotations on the
//! symmetric C = L^{-1} K L^{-T}, back-transform Phi = L^{-T} Q. Jacobi is
//! the slowest of the classic symmetric eigensolvers but converges
//! unconditionally, and accuracy, not speed, is the oracle's job.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, SparseMatrix};

/// Hard cap on the dense dimension; beyond this the O(n^3) work stops being
/// desk-scale.
pub const MAX_DENSE_DIM: usize = 4000;
const JACOBI_MAX_SWEEPS: usize = 50;

/// Which power of the operator [`fractional_apply`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSign {
    /// A_h^{+alpha}.
    Positive,
    /// A_h^{-alpha}, the fractional solve.
    Negative,
}

/// Full generalized eigendecomposition K Phi = M Phi Lambda with
/// M-orthonormal columns (Phi^T M Phi = I), eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub lambdas: Vec<f64>,
    modes: Vec<f64>,
    n: usize,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The i-th M-orthonormal eigenvector, ascending eigenvalue order.
    pub fn mode(&self, i: usize) -> &[f64] {
        &self.modes[i * self.n..(i + 1) * self.n]
    }
}

/// Comparison record between a computed vector and a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRecord {
    /// ||u - u_ref||_M.
    pub m_norm: f64,
    /// ||u - u_ref||_M / ||u_ref||_M.
    pub relative: f64,
    /// Maximum nodal difference.
    pub max_abs: f64,
}

fn to_dense(a: &SparseMatrix) -> Vec<f64> {
    let n = a.n();
    let mut dense = vec![0.0; n * n];
    for (i, j, v) in a.triplets() {
        dense[i * n + j] = v;
    }
    dense
}

/// In-place dense Cholesky, lower triangle; the strict upper triangle is
/// zeroed.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 {
            return Err(Error::CholeskyFailure {
                pivot_index: j,
                pivot: diag,
            });
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = sum / ljj;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves L x = b in place.
fn forward_substitute(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let mut sum = x[i];
        for k in 0..i {
            sum -= l[i * n + k] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
}

/// Solves L^T x = b in place.
fn back_substitute_transposed(l: &[f64], n: usize, x: &mut [f64]) {
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[i * n + j] * a[i * n + j];
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: returns the
/// eigenvalues (diagonal after convergence) and the accumulated rotations Q
/// (row-major, eigenvector j in column j).
fn jacobi_eigen(a: &mut [f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    if n <= 1 {
        return Ok((a.iter().step_by(n + 1).copied().collect(), q));
    }
    let frobenius = norm2(a);
    let threshold = 1e-15 * frobenius.max(f64::MIN_POSITIVE);
    let mut off = off_diagonal_norm(a, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off <= threshold {
            return Ok(((0..n).map(|i| a[i * n + i]).collect(), q));
        }
        for p in 0..n - 1 {
            for qi in (p + 1)..n {
                let apq = a[p * n + qi];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[qi * n + qi];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // two-sided rotation in the (p, q) plane
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + qi];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + qi] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[qi * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[qi * n + k] = s * apk + c * aqk;
                }
                a[p * n + qi] = 0.0;
                a[qi * n + p] = 0.0;
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkq = q[k * n + qi];
                    q[k * n + p] = c * qkp - s * qkq;
                    q[k * n + qi] = s * qkp + c * qkq;
                }
            }
        }
        off = off_diagonal_norm(a, n);
    }
    Err(Error::JacobiNotConverged {
        off_diagonal: off,
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// Full generalized eigendecomposition of the SPD pencil (K, M).
pub fn dense_generalized_eig(
    stiffness: &SparseMatrix,
    mass: &SparseMatrix,
) -> Result<SpectralDecomposition> {
    let n = stiffness.n();
    if mass.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mass.n(),
        });
    }
    if n > MAX_DENSE_DIM {
        return Err(Error::InvalidParameter {
            name: "dimension",
            message: format!("dense oracle capped at {MAX_DENSE_DIM} unknowns, got {n}"),
        });
    }
    let mut l = to_dense(mass);
    cholesky_in_place(&mut l, n)?;

    // C = L^{-1} K L^{-T}: forward-solve the columns of K, then the rows
    let mut c = to_dense(stiffness);
    let mut column = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            column[i] = c[i * n + j];
        }
        forward_substitute(&l, n, &mut column);
        for i in 0..n {
            c[i * n + j] = column[i];
        }
    }
    for i in 0..n {
        forward_substitute(&l, n, &mut c[i * n..(i + 1) * n]);
    }
    // enforce exact symmetry lost to roundoff
    for i in 0..n {
        for j in (i + 1)..n {
            let average = 0.5 * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = average;
            c[j * n + i] = average;
        }
    }

    let (raw_lambdas, q) = jacobi_eigen(&mut c, n)?;

    // ascending sort with deterministic tie-break by original index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_lambdas[a]
            .partial_cmp(&raw_lambdas[b])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut lambdas = Vec::with_capacity(n);
    let mut modes = vec![0.0; n * n];
    let mut mode = vec![0.0; n];
    for (slot, &src) in order.iter().enumerate() {
        lambdas.push(raw_lambdas[src]);
        for i in 0..n {
            mode[i] = q[i * n + src];
        }
        back_substitute_transposed(&l, n, &mut mode);
        modes[slot * n..(slot + 1) * n].copy_from_slice(&mode);
    }
    Ok(SpectralDecomposition { lambdas, modes, n })
}

/// Applies A_h^{±alpha} spectrally: u = Σ_i λ_i^{±alpha} (φ_i^T M f) φ_i.
/// With the negative sign this is the exact discrete solution of
/// A_h^alpha u = f.
pub fn fractional_apply(
    dec: &SpectralDecomposition,
    mass: &SparseMatrix,
    f: &[f64],
    alpha: f64,
    sign: PowerSign,
) -> Result<Vec<f64>> {
    if f.len() != dec.n {
        return Err(Error::DimensionMismatch {
            expected: dec.n,
            found: f.len(),
        });
    }
    let exponent = match sign {
        PowerSign::Positive => alpha,
        PowerSign::Negative => -alpha,
    };
    let mf = mass.spmv(f)?;
    let mut u = vec![0.0; dec.n];
    for i in 0..dec.n {
        let mode = dec.mode(i);
        let coefficient = dot(mode, &mf) * dec.lambdas[i].powf(exponent);
        for (uj, mj) in u.iter_mut().zip(mode) {
            *uj += coefficient * mj;
        }
    }
    Ok(u)
}

/// M-norm and max-norm differences between a vector and a reference.
pub fn compare(u: &[f64], u_ref: &[f64], mass: &SparseMatrix) -> Result<CompareRecord> {
    if u.len() != u_ref.len() {
        return Err(Error::DimensionMismatch {
            expected: u_ref.len(),
            found: u.len(),
        });
    }
    let diff: Vec<f64> = u.iter().zip(u_ref).map(|(a, b)| a - b).collect();
    let m_diff = mass.spmv(&diff)?;
    let m_norm = dot(&diff, &m_diff).max(0.0).sqrt();
    let m_ref = mass.spmv(u_ref)?;
    let ref_norm = dot(u_ref, &m_ref).max(0.0).sqrt();
    let relative = if ref_norm > 0.0 {
        m_norm / ref_norm
    } else if m_norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let max_abs = diff.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    Ok(CompareRecord {
        m_norm,
        relative,
        max_abs,
    })
}
