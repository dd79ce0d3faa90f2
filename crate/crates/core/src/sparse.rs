//! Symmetric sparse matrices in compressed-row form and a conjugate-gradient
//! solver. This is the only linear-algebra engine the time stepper needs:
//! the stiffness matrix K, the mass matrix M and their linear combinations
//! all live here.

use crate::error::{Error, Result};
use std::io::{self, Write};

/// Default relative residual tolerance for [`cg_solve`].
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Symmetric sparse matrix in compressed-row storage.
///
/// Column indices are sorted and unique within each row. Matrices are
/// immutable after [`TripletBuilder::finalize`]; all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates (row, col, value) triplets; duplicates are summed on finalize,
/// the standard finite-element scatter semantics.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.n && col < self.n, "triplet index out of range");
        self.entries.push((row, col, value));
    }

    pub fn finalize(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(row, col, _)| (row, col));
        let mut row_offsets = vec![0usize; self.n + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut prev: Option<(usize, usize)> = None;
        for (row, col, value) in self.entries {
            if prev == Some((row, col)) {
                *values.last_mut().unwrap() += value;
            } else {
                col_indices.push(col);
                values.push(value);
                prev = Some((row, col));
            }
            row_offsets[row + 1] = col_indices.len();
        }
        // rows with no entries inherit the running offset
        for r in 1..=self.n {
            if row_offsets[r] < row_offsets[r - 1] {
                row_offsets[r] = row_offsets[r - 1];
            }
        }
        SparseMatrix {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from dense row-major data, keeping nonzero entries.
    /// Intended for small hand-written test systems.
    pub fn from_dense(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n);
        let mut builder = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if v != 0.0 {
                    builder.add(i, j, v);
                }
            }
        }
        builder.finalize()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_offsets[row];
        let hi = self.row_offsets[row + 1];
        match self.col_indices[lo..hi].binary_search(&col) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |row| {
            let lo = self.row_offsets[row];
            let hi = self.row_offsets[row + 1];
            self.col_indices[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(move |(&col, &value)| (row, col, value))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest relative asymmetry max|a_ij - a_ji| / max|a_ij| over stored
    /// entries; zero for an exactly symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i)).abs());
        }
        worst / scale
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (row, out) in y.iter_mut().enumerate() {
            let lo = self.row_offsets[row];
            let hi = self.row_offsets[row + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *out = acc;
        }
        Ok(y)
    }

    /// Coordinate-format text dump, debugging only.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "%%MatrixMarket-like symmetric {} {} {}",
            self.n,
            self.n,
            self.nnz()
        )?;
        for (row, col, value) in self.triplets() {
            writeln!(w, "{} {} {:.16e}", row, col, value)?;
        }
        Ok(())
    }
}

/// Entrywise linear combination a*A + b*B on the union sparsity pattern.
pub fn add_scaled(a: &SparseMatrix, alpha: f64, b: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    let n = a.n;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(a.nnz().max(b.nnz()));
    let mut values = Vec::with_capacity(col_indices.capacity());
    row_offsets.push(0);
    for row in 0..n {
        let (mut ia, ea) = (a.row_offsets[row], a.row_offsets[row + 1]);
        let (mut ib, eb) = (b.row_offsets[row], b.row_offsets[row + 1]);
        while ia < ea || ib < eb {
            let ca = if ia < ea { a.col_indices[ia] } else { usize::MAX };
            let cb = if ib < eb { b.col_indices[ib] } else { usize::MAX };
            if ca < cb {
                col_indices.push(ca);
                values.push(alpha * a.values[ia]);
                ia += 1;
            } else if cb < ca {
                col_indices.push(cb);
                values.push(beta * b.values[ib]);
                ib += 1;
            } else {
                col_indices.push(ca);
                values.push(alpha * a.values[ia] + beta * b.values[ib]);
                ia += 1;
                ib += 1;
            }
        }
        row_offsets.push(col_indices.len());
    }
    Ok(SparseMatrix {
        n,
        row_offsets,
        col_indices,
        values,
    })
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Convergence report for one conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final true relative residual ||b - Ax|| / ||b||.
    pub residual: f64,
    pub converged: bool,
}

impl CgReport {
    /// Upgrades `converged == false` to a hard error; callers that cannot
    /// tolerate an inexact solve funnel through this.
    pub fn require_converged(&self, what: &'static str) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                what,
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Conjugate gradients with Jacobi (diagonal) preconditioning.
///
/// Solves Ax = b for symmetric positive definite A, starting from zero.
/// Returns the iterate together with a [`CgReport`]; a report with
/// `converged == false` is not an error here, severity is the caller's call.
/// `b = 0` returns `x = 0` immediately.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    cg_solve_with_options(a, b, tol, max_iter, true)
}

/// [`cg_solve`] with the Jacobi preconditioner toggleable.
pub fn cg_solve_with_options(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    jacobi: bool,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }
    let inv_diag: Option<Vec<f64>> = if jacobi {
        Some(a.diagonal().iter().map(|&d| 1.0 / d).collect())
    } else {
        None
    };
    let apply_precond = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(d) => r.iter().zip(d).map(|(ri, di)| ri * di).collect(),
            None => r.to_vec(),
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while iterations < max_iter {
        let ap = a.spmv(&p)?;
        let ptap = dot(&p, &ap);
        if ptap <= 0.0 {
            return Err(Error::Breakdown { ptap });
        }
        let step = rz / ptap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        if norm2(&r) / b_norm <= tol {
            // the recursive residual drifts from the true one; certify on the
            // true residual before reporting convergence
            let true_res = true_residual(a, &x, b)? / b_norm;
            if true_res <= tol {
                return Ok((
                    x,
                    CgReport {
                        iterations,
                        residual: true_res,
                        converged: true,
                    },
                ));
            }
            r = residual_vec(a, &x, b)?;
        }
        z = apply_precond(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_next;
    }
    let residual = true_residual(a, &x, b)? / b_norm;
    Ok((
        x,
        CgReport {
            iterations,
            residual,
            converged: residual <= tol,
        },
    ))
}

fn residual_vec(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let ax = a.spmv(x)?;
    Ok(b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect())
}

fn true_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    Ok(norm2(&residual_vec(a, x, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_two() -> SparseMatrix {
        SparseMatrix::from_dense(2, &[2.0, -1.0, -1.0, 2.0])
    }

    #[test]
    fn spmv_identity() {
        let a = SparseMatrix::identity(3);
        let y = a.spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_row_sums() {
        let y = two_by_two().spmv(&[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 1.0]);
    }

    #[test]
    fn spmv_column_extraction() {
        let y = two_by_two().spmv(&[1.0, 0.0]).unwrap();
        assert_eq!(y, vec![2.0, -1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let err = two_by_two().spmv(&[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.5);
        b.add(1, 0, -1.0);
        b.add(0, 1, -1.0);
        b.add(1, 1, 4.0);
        let a = b.finalize();
        assert_eq!(a.get(0, 0), 3.5);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn add_scaled_cancellation() {
        let a = two_by_two();
        let z = add_scaled(&a, 1.0, &a, -1.0).unwrap();
        assert!(z.triplets().all(|(_, _, v)| v == 0.0));
    }

    #[test]
    fn add_scaled_scalars() {
        let i = SparseMatrix::identity(3);
        let five = add_scaled(&i, 2.0, &i, 3.0).unwrap();
        for k in 0..3 {
            assert_eq!(five.get(k, k), 5.0);
        }
    }

    #[test]
    fn add_scaled_union_pattern() {
        let a = SparseMatrix::from_dense(2, &[1.0, 0.0, 0.0, 1.0]);
        let b = SparseMatrix::from_dense(2, &[0.0, 2.0, 2.0, 0.0]);
        let c = add_scaled(&a, 1.0, &b, 1.0).unwrap();
        assert_eq!(c.nnz(), 4);
        assert_eq!(c.get(0, 1), 2.0);
        assert_eq!(c.get(0, 0), 1.0);
    }

    #[test]
    fn coordinate_dump_shape() {
        let mut out = Vec::new();
        two_by_two().write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket-like symmetric 2 2 4"));
        assert!(lines.next().unwrap().starts_with("0 0 2"));
    }

    #[test]
    fn cg_identity_one_iteration() {
        let a = SparseMatrix::identity(2);
        let (x, report) = cg_solve(&a, &[4.0, 5.0], 1e-12, 10).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 1);
        assert!((x[0] - 4.0).abs() < 1e-12 && (x[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cg_two_by_two_exact() {
        // A = [[4,1],[1,3]], b = (1,2): x = (1/11, 7/11) by the exact inverse
        let a = SparseMatrix::from_dense(2, &[4.0, 1.0, 1.0, 3.0]);
        let (x, report) = cg_solve(&a, &[1.0, 2.0], 1e-10, 100).unwrap();
        assert!(report.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn cg_zero_rhs() {
        let a = two_by_two();
        let (x, report) = cg_solve(&a, &[0.0, 0.0], 1e-10, 100).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(report.iterations, 0);
        assert!(report.converged);
    }

    #[test]
    fn cg_breakdown_on_indefinite() {
        let a = SparseMatrix::from_dense(2, &[1.0, 0.0, 0.0, -1.0]);
        let err = cg_solve_with_options(&a, &[0.0, 1.0], 1e-10, 100, false).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }));
    }

    #[test]
    fn cg_not_converged_report() {
        let a = SparseMatrix::from_dense(2, &[4.0, 1.0, 1.0, 3.0]);
        let (_, report) = cg_solve(&a, &[1.0, 2.0], 1e-14, 1).unwrap();
        assert!(!report.converged);
        assert!(report.require_converged("test solve").is_err());
    }

    /// SPD-by-diagonal-dominance tridiagonal system with deterministic
    /// pseudo-random entries derived from a seed.
    fn tridiagonal_spd(n: usize, seed: u64) -> (SparseMatrix, Vec<f64>) {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|_| next() - 0.5).collect();
        let mut builder = TripletBuilder::new(n);
        for i in 0..n {
            let mut diag = 1.0 + next();
            if i > 0 {
                builder.add(i, i - 1, off[i - 1]);
                diag += off[i - 1].abs();
            }
            if i + 1 < n {
                builder.add(i, i + 1, off[i]);
                diag += off[i].abs();
            }
            builder.add(i, i, diag);
        }
        let b: Vec<f64> = (0..n).map(|_| next() * 2.0 - 1.0).collect();
        (builder.finalize(), b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn cg_residual_contract(n in 1usize..=50, seed in 0u64..u64::MAX) {
            let (a, b) = tridiagonal_spd(n, seed);
            let (x, report) = cg_solve(&a, &b, 1e-10, 10 * n.max(10)).unwrap();
            prop_assert!(report.converged);
            let ax = a.spmv(&x).unwrap();
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
            let rel = norm2(&r) / norm2(&b);
            prop_assert!(rel <= 1e-10, "relative residual {rel}");
        }

        #[test]
        fn add_scaled_bilinear(
            n in 1usize..=20,
            seed in 0u64..u64::MAX,
            a1 in -10.0f64..10.0,
            b1 in -10.0f64..10.0,
            a2 in -10.0f64..10.0,
            b2 in -10.0f64..10.0,
        ) {
            let (a, _) = tridiagonal_spd(n, seed);
            let (b, _) = tridiagonal_spd(n, seed.wrapping_add(1));
            let lhs_one = add_scaled(&a, a1, &b, b1).unwrap();
            let lhs_two = add_scaled(&a, a2, &b, b2).unwrap();
            let sum = add_scaled(&lhs_one, 1.0, &lhs_two, 1.0).unwrap();
            let direct = add_scaled(&a, a1 + a2, &b, b1 + b2).unwrap();
            for ((i, j, u), (p, q, v)) in sum.triplets().zip(direct.triplets()) {
                prop_assert_eq!((i, j), (p, q));
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs().max(v.abs())));
            }
        }

        #[test]
        fn spmv_symmetry(n in 2usize..=40, seed in 0u64..u64::MAX) {
            let (a, x) = tridiagonal_spd(n, seed);
            let (_, y) = tridiagonal_spd(n, seed.wrapping_add(7));
            let ay = a.spmv(&y).unwrap();
            let ax = a.spmv(&x).unwrap();
            let left = dot(&x, &ay);
            let right = dot(&y, &ax);
            let scale = left.abs().max(right.abs()).max(1e-300);
            prop_assert!((left - right).abs() / scale <= 1e-12);
        }
    }
}
