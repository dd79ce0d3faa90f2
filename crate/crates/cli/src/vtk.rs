//! Legacy VTK ASCII writer for a P1 nodal field on a triangle mesh.

use fracell::mesh::Mesh;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Renders the mesh and one nodal scalar field named `u` as a legacy VTK
/// unstructured grid (points at z = 0, triangle cells of type 5).
pub fn vtk_string(mesh: &Mesh, field: &[f64]) -> String {
    assert_eq!(field.len(), mesh.nodes.len(), "field is nodal");
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 2.0");
    let _ = writeln!(out, "fracell solution field");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.nodes.len());
    for (x, y) in &mesh.nodes {
        let _ = writeln!(out, "{x:.16e} {y:.16e} 0.0");
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.triangles.len(), 4 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.triangles.len());
    for _ in &mesh.triangles {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.nodes.len());
    let _ = writeln!(out, "SCALARS u double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for value in field {
        let _ = writeln!(out, "{value:.16e}");
    }
    out
}

pub fn write_vtk(mesh: &Mesh, field: &[f64], path: &Path) -> io::Result<()> {
    std::fs::write(path, vtk_string(mesh, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle() -> Mesh {
        Mesh {
            nodes: vec![(0.0, 0.0), (1.0, 0.0), (0.25, 0.75)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[0, 1], [1, 2], [2, 0]],
        }
    }

    #[test]
    fn format_fixture() {
        let text = vtk_string(&one_triangle(), &[1.0, 2.0, 3.0]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 2.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert_eq!(lines[4], "POINTS 3 double");
        assert_eq!(lines[8], "CELLS 1 4");
        assert_eq!(lines[9], "3 0 1 2");
        assert_eq!(lines[10], "CELL_TYPES 1");
        assert_eq!(lines[11], "5");
        assert_eq!(lines[12], "POINT_DATA 3");
        assert_eq!(lines[13], "SCALARS u double 1");
        assert_eq!(lines[14], "LOOKUP_TABLE default");
    }

    #[test]
    fn points_round_trip_to_full_precision() {
        let mesh = Mesh {
            nodes: vec![(0.1234567890123456, 0.9876543210987654), (1.0, 0.0), (0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![[0, 1], [1, 2], [2, 0]],
        };
        let text = vtk_string(&mesh, &[0.0, 0.0, 0.0]);
        for (line, (x, y)) in text.lines().skip(5).take(3).zip(&mesh.nodes) {
            let parts: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            assert!((parts[0] - x).abs() <= 1e-15 * x.abs());
            assert!((parts[1] - y).abs() <= 1e-15 * y.abs());
            assert_eq!(parts[2], 0.0);
        }
    }
}
