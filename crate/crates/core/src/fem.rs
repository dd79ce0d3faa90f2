//! P1 finite-element assembly: the stiffness form
//! a(u,v) = ∫ k ∇u·∇v + c u v dx + ∮ μ u v ds, the mass form <u,v> = ∫ u v dx,
//! and L2 projection of right-hand sides.
//!
//! All coefficients are constants and every element integral is closed-form,
//! so assembly carries no quadrature tolerance. The mass matrix is consistent,
//! not lumped.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{cg_solve, SparseMatrix, TripletBuilder, DEFAULT_CG_TOL};

const MIN_ELEMENT_AREA: f64 = 1e-14;

/// Right-hand side of the fractional problem: the constant 1 in the
/// reproduction runs, nodal values for analytic tests.
#[derive(Debug, Clone, PartialEq)]
pub enum RightHandSide {
    Constant(f64),
    Nodal(Vec<f64>),
}

/// Coefficients of the elliptic operator, boundary data and the exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Diffusion coefficient, > 0.
    pub k: f64,
    /// Reaction coefficient, >= 0.
    pub c: f64,
    /// Robin coefficient; > 0 normally, 0 allowed for analytic tests.
    pub mu: f64,
    pub f: RightHandSide,
    /// Fractional exponent in (0, 1).
    pub alpha: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() || self.k <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "k",
                message: format!("diffusion coefficient must be positive, got {}", self.k),
            });
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(Error::InvalidParameter {
                name: "c",
                message: format!("reaction coefficient must be non-negative, got {}", self.c),
            });
        }
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                message: format!("Robin coefficient must be non-negative, got {}", self.mu),
            });
        }
        if self.mu == 0.0 && self.c == 0.0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                message: "mu = 0 and c = 0 leave the operator singular".into(),
            });
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("exponent must lie in (0, 1), got {}", self.alpha),
            });
        }
        Ok(())
    }
}

/// Stiffness and mass matrices of one mesh/problem pair.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: SparseMatrix,
    pub mass: SparseMatrix,
    pub n: usize,
}

/// Assembles K with K_ij = Σ_T k ∫ ∇φ_i·∇φ_j + c ∫ φ_i φ_j + Σ_{e⊂∂Ω} μ ∫ φ_i φ_j.
pub fn assemble_stiffness(mesh: &Mesh, spec: &ProblemSpec) -> Result<SparseMatrix> {
    let n = mesh.nodes.len();
    let mut builder = TripletBuilder::new(n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        if area < MIN_ELEMENT_AREA {
            return Err(Error::DegenerateElement { triangle: t, area });
        }
        let [p0, p1, p2] = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        // constant P1 gradients: ∇φ_i = (b_i, c_i) / (2A)
        let b = [p1.1 - p2.1, p2.1 - p0.1, p0.1 - p1.1];
        let c = [p2.0 - p1.0, p0.0 - p2.0, p1.0 - p0.0];
        for i in 0..3 {
            for j in 0..3 {
                let diffusion = spec.k * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                let reaction = spec.c * area / if i == j { 6.0 } else { 12.0 };
                builder.add(tri[i], tri[j], diffusion + reaction);
            }
        }
    }
    if spec.mu != 0.0 {
        for edge in &mesh.boundary_edges {
            let len = mesh.edge_length(edge[0], edge[1]);
            for i in 0..2 {
                for j in 0..2 {
                    let value = spec.mu * len / if i == j { 3.0 } else { 6.0 };
                    builder.add(edge[i], edge[j], value);
                }
            }
        }
    }
    Ok(builder.finalize())
}

/// Assembles the consistent mass matrix M_ij = Σ_T ∫ φ_i φ_j.
pub fn assemble_mass(mesh: &Mesh) -> Result<SparseMatrix> {
    let n = mesh.nodes.len();
    let mut builder = TripletBuilder::new(n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        if area < MIN_ELEMENT_AREA {
            return Err(Error::DegenerateElement { triangle: t, area });
        }
        for i in 0..3 {
            for j in 0..3 {
                builder.add(tri[i], tri[j], area / if i == j { 6.0 } else { 12.0 });
            }
        }
    }
    Ok(builder.finalize())
}

pub fn assemble(mesh: &Mesh, spec: &ProblemSpec) -> Result<AssembledSystem> {
    Ok(AssembledSystem {
        stiffness: assemble_stiffness(mesh, spec)?,
        mass: assemble_mass(mesh)?,
        n: mesh.nodes.len(),
    })
}

/// L2 projection of the right-hand side onto the P1 space: solves M p = b
/// with b_i = <f, φ_i>.
///
/// A nodal right-hand side already lies in the space, so b = M f and the
/// projection returns the nodal vector unchanged. For constant f the exact
/// load is f times the mass-matrix row sums (the hat functions partition
/// unity), followed by one CG solve.
pub fn l2_project(system: &AssembledSystem, f: &RightHandSide) -> Result<Vec<f64>> {
    match f {
        RightHandSide::Nodal(values) => {
            if values.len() != system.n {
                return Err(Error::DimensionMismatch {
                    expected: system.n,
                    found: values.len(),
                });
            }
            Ok(values.clone())
        }
        RightHandSide::Constant(value) => {
            let constant = vec![*value; system.n];
            let load = system.mass.spmv(&constant)?;
            let (projection, report) =
                cg_solve(&system.mass, &load, DEFAULT_CG_TOL, 10 * system.n.max(10))?;
            report.require_converged("mass-matrix solve in l2_project")?;
            Ok(projection)
        }
    }
}

/// ||v||_M = sqrt(v^T M v), the discrete L2 norm.
pub fn m_norm(mass: &SparseMatrix, v: &[f64]) -> Result<f64> {
    let mv = mass.spmv(v)?;
    Ok(crate::sparse::dot(v, &mv).max(0.0).sqrt())
}

/// M-norm of the right-hand side; exact for both representations since
/// constants lie in the P1 space.
pub fn rhs_m_norm(system: &AssembledSystem, f: &RightHandSide) -> Result<f64> {
    match f {
        RightHandSide::Nodal(values) => m_norm(&system.mass, values),
        RightHandSide::Constant(value) => {
            let ones = vec![1.0; system.n];
            let area = crate::sparse::dot(&ones, &system.mass.spmv(&ones)?);
            Ok(value.abs() * area.sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cut_square_mesh, generate_square_mesh};
    use crate::sparse::dot;

    fn reference_triangle() -> Mesh {
        Mesh {
            nodes: vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[0, 1], [1, 2], [2, 0]],
        }
    }

    fn spec(k: f64, c: f64, mu: f64) -> ProblemSpec {
        ProblemSpec {
            k,
            c,
            mu,
            f: RightHandSide::Constant(1.0),
            alpha: 0.5,
        }
    }

    #[test]
    fn reference_triangle_stiffness() {
        let k = assemble_stiffness(&reference_triangle(), &spec(1.0, 0.0, 0.0)).unwrap();
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert!(
                    (k.get(i, j) - want).abs() < 1e-15,
                    "K[{i}][{j}] = {}, want {want}",
                    k.get(i, j)
                );
            }
        }
    }

    #[test]
    fn reference_triangle_reaction_mass() {
        let k = assemble_stiffness(&reference_triangle(), &spec(0.0, 1.0, 0.0)).unwrap();
        let m = assemble_mass(&reference_triangle()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((k.get(i, j) - want).abs() < 1e-15);
                assert!((m.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn robin_edge_contribution() {
        // hypotenuse only marked: isolates one edge of length sqrt(2)
        let mesh = Mesh {
            nodes: vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[1, 2]],
        };
        let k = assemble_stiffness(&mesh, &spec(0.0, 0.0, 1.0)).unwrap();
        let len = 2.0f64.sqrt();
        assert!((k.get(1, 1) - len / 3.0).abs() < 1e-15);
        assert!((k.get(2, 2) - len / 3.0).abs() < 1e-15);
        assert!((k.get(1, 2) - len / 6.0).abs() < 1e-15);
        assert!(k.get(0, 0).abs() < 1e-15);
    }

    #[test]
    fn mass_partition_of_unity() {
        for n in [1, 3, 8] {
            let mesh = generate_square_mesh(n);
            let m = assemble_mass(&mesh).unwrap();
            let ones = vec![1.0; mesh.nodes.len()];
            let total = dot(&ones, &m.spmv(&ones).unwrap());
            assert!((total - 1.0).abs() < 1e-12, "area {total} at n={n}");
        }
    }

    #[test]
    fn mass_cut_square_area() {
        let mesh = generate_cut_square_mesh(16).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let ones = vec![1.0; mesh.nodes.len()];
        let total = dot(&ones, &m.spmv(&ones).unwrap());
        let exact = 1.0 - std::f64::consts::PI / 16.0;
        assert!((total - exact).abs() / exact < 0.01);
    }

    #[test]
    fn patch_test_constants_in_kernel() {
        let mesh = generate_square_mesh(5);
        let k = assemble_stiffness(&mesh, &spec(1.0, 0.0, 0.0)).unwrap();
        let ones = vec![1.0; mesh.nodes.len()];
        let ku = k.spmv(&ones).unwrap();
        for v in ku {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_scales_linearly_in_k() {
        let mesh = generate_square_mesh(4);
        let k1 = assemble_stiffness(&mesh, &spec(1.0, 0.7, 3.0)).unwrap();
        let k2 = assemble_stiffness(&mesh, &spec(2.0, 0.7, 3.0)).unwrap();
        let pure = assemble_stiffness(&mesh, &spec(1.0, 0.0, 0.0)).unwrap();
        let diff = crate::sparse::add_scaled(&k2, 1.0, &k1, -1.0).unwrap();
        for ((i, j, d), (_, _, p)) in diff.triplets().zip(pure.triplets()) {
            assert!(
                (d - p).abs() <= 1e-12 * (1.0 + p.abs()),
                "mismatch at ({i}, {j})"
            );
        }
    }

    #[test]
    fn matrices_symmetric() {
        let mesh = generate_cut_square_mesh(8).unwrap();
        let system = assemble(&mesh, &spec(1.0, 0.0, 10.0)).unwrap();
        assert!(system.stiffness.symmetry_defect() < 1e-12);
        assert!(system.mass.symmetry_defect() < 1e-12);
    }

    #[test]
    fn assembled_matrices_are_symmetric_bilinear_forms() {
        // x^T (A y) = y^T (A x) for random vectors on K and M
        let mesh = generate_cut_square_mesh(8).unwrap();
        let system = assemble(&mesh, &spec(1.0, 0.3, 10.0)).unwrap();
        let mut state = 0x5deece66du64;
        let mut random_vector = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        };
        for matrix in [&system.stiffness, &system.mass] {
            for _ in 0..20 {
                let x = random_vector(system.n);
                let y = random_vector(system.n);
                let left = dot(&x, &matrix.spmv(&y).unwrap());
                let right = dot(&y, &matrix.spmv(&x).unwrap());
                let scale = left.abs().max(right.abs()).max(1e-300);
                assert!((left - right).abs() / scale <= 1e-12);
            }
        }
    }

    #[test]
    fn mass_solve_recovers_ones() {
        // constructed right-hand side: b = M*1 so the solution is all-ones
        let mesh = generate_square_mesh(8);
        let m = assemble_mass(&mesh).unwrap();
        let ones = vec![1.0; mesh.nodes.len()];
        let b = m.spmv(&ones).unwrap();
        let (x, report) = cg_solve(&m, &b, 1e-10, 10 * m.n()).unwrap();
        assert!(report.converged);
        for v in &x {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn project_constant_gives_ones() {
        let mesh = generate_square_mesh(6);
        let system = assemble(&mesh, &spec(1.0, 0.0, 10.0)).unwrap();
        let p = l2_project(&system, &RightHandSide::Constant(1.0)).unwrap();
        for v in &p {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn project_nodal_is_identity() {
        let mesh = generate_square_mesh(3);
        let system = assemble(&mesh, &spec(1.0, 0.0, 10.0)).unwrap();
        let nodal: Vec<f64> = (0..system.n).map(|i| i as f64).collect();
        let p = l2_project(&system, &RightHandSide::Nodal(nodal.clone())).unwrap();
        assert_eq!(p, nodal);
    }

    #[test]
    fn projection_preserves_mean_on_cut_square() {
        let mesh = generate_cut_square_mesh(16).unwrap();
        let system = assemble(&mesh, &spec(1.0, 0.0, 10.0)).unwrap();
        let p = l2_project(&system, &RightHandSide::Constant(1.0)).unwrap();
        let ones = vec![1.0; system.n];
        let mean = dot(&ones, &system.mass.spmv(&p).unwrap());
        assert!((mean - mesh.total_area()).abs() < 1e-8);
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        assert!(spec(0.0, 0.0, 1.0).validate().is_err());
        assert!(spec(1.0, -1.0, 1.0).validate().is_err());
        assert!(spec(1.0, 0.0, 0.0).validate().is_err());
        let mut s = spec(1.0, 0.0, 1.0);
        s.alpha = 1.0;
        assert!(s.validate().is_err());
        s.alpha = 0.5;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn degenerate_element_rejected() {
        let mesh = Mesh {
            nodes: vec![(0.0, 0.0), (1.0, 0.0), (2.0, 1e-16)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[0, 1], [1, 2], [2, 0]],
        };
        let err = assemble_mass(&mesh).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { .. }));
    }
}
