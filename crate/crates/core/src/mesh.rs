//! Conforming P1 triangulations of the unit square and of the cut-square
//! domain (unit square minus the quarter disc x^2 + y^2 < 0.25), with
//! boundary edges marked for the Robin integral.
//!
//! Node indices are 0-based everywhere, in the file format and internally.
//! Triangles are stored counterclockwise; the loader silently reorients
//! clockwise input. There is no Dirichlet machinery: all nodes are free.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Planar triangulation with marked boundary edges.
///
/// Immutable after construction and safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Node coordinates, domain contained in the unit square.
    pub nodes: Vec<(f64, f64)>,
    /// Node index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Node index pairs lying on the domain boundary.
    pub boundary_edges: Vec<[usize; 2]>,
}

/// Counts and geometric measures of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub node_count: usize,
    pub triangle_count: usize,
    pub boundary_edge_count: usize,
    /// Smallest interior angle over all triangles, degrees.
    pub min_angle: f64,
    /// Length of the longest edge.
    pub h_max: f64,
}

fn signed_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.nodes[a];
        let (xb, yb) = self.nodes[b];
        ((xb - xa).powi(2) + (yb - ya).powi(2)).sqrt()
    }

    /// Map from undirected edge to the number of owning triangles.
    fn edge_ownership(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Checks every structural invariant; loader and generators run this
    /// before handing a mesh out.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(Error::Topology(format!(
                        "triangle {t} references node {i} of {n}"
                    )));
                }
            }
            let area = self.triangle_area(t);
            if area <= 0.0 {
                return Err(Error::Topology(format!(
                    "triangle {t} has non-positive signed area {area:.3e}"
                )));
            }
        }
        for (e, edge) in self.boundary_edges.iter().enumerate() {
            for &i in edge {
                if i >= n {
                    return Err(Error::Topology(format!(
                        "boundary edge {e} references node {i} of {n}"
                    )));
                }
            }
            if edge[0] == edge[1] {
                return Err(Error::Topology(format!("boundary edge {e} is degenerate")));
            }
        }
        let ownership = self.edge_ownership();
        let mut marked: HashMap<(usize, usize), usize> = HashMap::new();
        for edge in &self.boundary_edges {
            *marked.entry(edge_key(edge[0], edge[1])).or_insert(0) += 1;
        }
        for (key, count) in &marked {
            if *count > 1 {
                return Err(Error::Topology(format!(
                    "boundary edge ({}, {}) listed more than once",
                    key.0, key.1
                )));
            }
            match ownership.get(key) {
                Some(1) => {}
                Some(owners) => {
                    return Err(Error::Topology(format!(
                        "boundary edge ({}, {}) owned by {owners} triangles, expected 1",
                        key.0, key.1
                    )))
                }
                None => {
                    return Err(Error::Topology(format!(
                        "boundary edge ({}, {}) is not an edge of any triangle",
                        key.0, key.1
                    )))
                }
            }
        }
        for (key, owners) in &ownership {
            if *owners == 1 && !marked.contains_key(key) {
                return Err(Error::Topology(format!(
                    "edge ({}, {}) owned by one triangle but not marked boundary",
                    key.0, key.1
                )));
            }
            if *owners > 2 {
                return Err(Error::Topology(format!(
                    "edge ({}, {}) owned by {owners} triangles",
                    key.0, key.1
                )));
            }
        }
        // closed loops: every node on the boundary has exactly two incident
        // boundary edges
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for edge in &self.boundary_edges {
            *degree.entry(edge[0]).or_insert(0) += 1;
            *degree.entry(edge[1]).or_insert(0) += 1;
        }
        for (node, deg) in degree {
            if deg != 2 {
                return Err(Error::Topology(format!(
                    "boundary node {node} has {deg} incident boundary edges, expected 2"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform triangulation of the unit square: (n+1)^2 nodes, each grid cell
/// split by the diagonal from its lower-left to its upper-right corner, all
/// 4n perimeter edges marked boundary.
pub fn generate_square_mesh(n: usize) -> Mesh {
    assert!(n >= 1, "need at least one subdivision per side");
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push((i as f64 * h, j as f64 * h));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = idx(i, j);
            let lr = idx(i + 1, j);
            let ur = idx(i + 1, j + 1);
            let ul = idx(i, j + 1);
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push([idx(i, 0), idx(i + 1, 0)]);
        boundary_edges.push([idx(i, n), idx(i + 1, n)]);
        boundary_edges.push([idx(0, i), idx(0, i + 1)]);
        boundary_edges.push([idx(n, i), idx(n, i + 1)]);
    }
    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
    };
    debug_assert!(mesh.validate().is_ok());
    mesh
}

/// One node moved by the arc projection: index, original and projected
/// position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ProjectedNode {
    pub index: usize,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

/// Fraction of the longest incident edge a projected node may travel. A node
/// that survives centroid filtering can sit at most 0.53 of its longest
/// incident edge away from the arc (it must own a triangle whose centroid is
/// outside the disc), so anything past 0.75 means the input geometry is
/// broken, not merely fine-grained.
const PROJECTION_TRAVEL_FRACTION: f64 = 0.75;

fn on_unit_square_perimeter(node: (f64, f64)) -> bool {
    let eps = 1e-12;
    node.0 < eps || node.0 > 1.0 - eps || node.1 < eps || node.1 > 1.0 - eps
}

/// An optional outside-node move is kept only if every incident triangle
/// retains at least this fraction of its area, which keeps angles workable.
const PROJECTION_MIN_AREA_FRACTION: f64 = 0.5;

/// Radially projects boundary nodes onto the arc x^2 + y^2 = radius^2.
///
/// Nodes strictly inside the disc must reach the arc (their elements would
/// otherwise poke into the cut); a node that cannot get there within
/// [`PROJECTION_TRAVEL_FRACTION`] of its longest incident edge is an error.
/// Off-perimeter boundary nodes within `window` outside the arc are pulled in
/// as well, which is what makes the cut boundary second-order accurate, but
/// only when the move keeps every incident triangle healthy; otherwise the
/// node stays as a local staircase corner.
pub(crate) fn project_boundary_nodes_to_arc(
    mesh: &mut Mesh,
    radius: f64,
    window: f64,
) -> Result<Vec<ProjectedNode>> {
    let node_count = mesh.nodes.len();
    let mut on_boundary = vec![false; node_count];
    for edge in &mesh.boundary_edges {
        on_boundary[edge[0]] = true;
        on_boundary[edge[1]] = true;
    }
    let mut longest_incident = vec![0.0f64; node_count];
    let mut incident_triangles: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let len = mesh.edge_length(a, b);
            longest_incident[a] = longest_incident[a].max(len);
            longest_incident[b] = longest_incident[b].max(len);
            incident_triangles[tri[k]].push(t);
        }
    }

    let mut moved = Vec::new();
    // mandatory pass: nodes strictly inside the disc
    for index in 0..node_count {
        let node = mesh.nodes[index];
        if !on_boundary[index] {
            continue;
        }
        let r = (node.0 * node.0 + node.1 * node.1).sqrt();
        if r == 0.0 || r >= radius {
            continue;
        }
        let distance = radius - r;
        let limit = PROJECTION_TRAVEL_FRACTION * longest_incident[index];
        if distance > limit {
            return Err(Error::RefinementTooCoarse {
                node: index,
                moved: distance,
                limit,
            });
        }
        let scale = radius / r;
        let to = (node.0 * scale, node.1 * scale);
        moved.push(ProjectedNode {
            index,
            from: node,
            to,
        });
        mesh.nodes[index] = to;
    }
    // best-effort pass: near-outside staircase corners
    for index in 0..node_count {
        let node = mesh.nodes[index];
        if !on_boundary[index] || on_unit_square_perimeter(node) {
            continue;
        }
        let r = (node.0 * node.0 + node.1 * node.1).sqrt();
        if !(r > radius && r - radius <= window) {
            continue;
        }
        if r - radius > PROJECTION_TRAVEL_FRACTION * longest_incident[index] {
            continue;
        }
        let scale = radius / r;
        let to = (node.0 * scale, node.1 * scale);
        let before: Vec<f64> = incident_triangles[index]
            .iter()
            .map(|&t| mesh.triangle_area(t))
            .collect();
        mesh.nodes[index] = to;
        let keeps_shape = incident_triangles[index].iter().zip(&before).all(
            |(&t, &old_area)| mesh.triangle_area(t) >= PROJECTION_MIN_AREA_FRACTION * old_area,
        );
        if keeps_shape {
            moved.push(ProjectedNode {
                index,
                from: node,
                to,
            });
        } else {
            mesh.nodes[index] = node;
        }
    }
    Ok(moved)
}

/// Triangulation of the unit square with the quarter disc of radius 0.5
/// around the origin removed: start from [`generate_square_mesh`], drop every
/// triangle whose centroid falls inside the disc, then pull the new boundary
/// nodes onto the arc. `n` must be even and at least 4 so that grid lines
/// pass through (0.5, 0) and (0, 0.5).
pub fn generate_cut_square_mesh(n: usize) -> Result<Mesh> {
    assert!(n >= 4 && n.is_multiple_of(2), "need even n >= 4 for the cut square");
    let square = generate_square_mesh(n);
    let radius = 0.5;
    let kept: Vec<[usize; 3]> = square
        .triangles
        .iter()
        .copied()
        .filter(|tri| {
            let cx = (square.nodes[tri[0]].0 + square.nodes[tri[1]].0 + square.nodes[tri[2]].0) / 3.0;
            let cy = (square.nodes[tri[0]].1 + square.nodes[tri[1]].1 + square.nodes[tri[2]].1) / 3.0;
            cx * cx + cy * cy >= radius * radius
        })
        .collect();

    // compact the node numbering, preserving the original order
    let mut new_index = vec![usize::MAX; square.nodes.len()];
    let mut nodes = Vec::new();
    let mut triangles = Vec::with_capacity(kept.len());
    for tri in kept {
        let mut mapped = [0usize; 3];
        for (slot, &old) in mapped.iter_mut().zip(tri.iter()) {
            if new_index[old] == usize::MAX {
                new_index[old] = nodes.len();
                nodes.push(square.nodes[old]);
            }
            *slot = new_index[old];
        }
        triangles.push(mapped);
    }

    let mut mesh = Mesh {
        nodes,
        triangles,
        boundary_edges: Vec::new(),
    };
    mesh.boundary_edges = recompute_boundary_edges(&mesh);
    let h_max = 2.0f64.sqrt() / n as f64;
    project_boundary_nodes_to_arc(&mut mesh, radius, 0.5 * h_max)?;
    mesh.validate()?;
    Ok(mesh)
}

/// Edges owned by exactly one triangle, sorted for deterministic output.
fn recompute_boundary_edges(mesh: &Mesh) -> Vec<[usize; 2]> {
    let ownership = mesh.edge_ownership();
    let mut edges: Vec<[usize; 2]> = ownership
        .into_iter()
        .filter(|&(_, owners)| owners == 1)
        .map(|((a, b), _)| [a, b])
        .collect();
    edges.sort();
    edges
}

/// Parses the plain-text mesh format:
///
/// ```text
/// $nodes
/// <count>
/// <x> <y>
/// $triangles
/// <count>
/// <i0> <i1> <i2>
/// $boundary_edges
/// <count>
/// <i0> <i1>
/// ```
///
/// Blank lines are ignored and `#` starts a comment. Clockwise triangles are
/// reoriented counterclockwise; sign conventions belong to the loader, not
/// the user.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                None
            } else {
                Some((i + 1, line))
            }
        })
        .collect();
    let eof = text.lines().count();
    let mut cursor = 0usize;

    let node_count = expect_section(&lines, &mut cursor, eof, "nodes")?;
    let mut nodes = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let (line, content) = next_line(&lines, &mut cursor, eof, "$nodes")?;
        let coords: std::result::Result<Vec<f64>, _> =
            content.split_whitespace().map(str::parse).collect();
        match coords {
            Ok(v) if v.len() == 2 => nodes.push((v[0], v[1])),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "expected two coordinates".into(),
                })
            }
        }
    }

    let triangle_count = expect_section(&lines, &mut cursor, eof, "triangles")?;
    let mut triangles = Vec::with_capacity(triangle_count);
    for _ in 0..triangle_count {
        let (line, content) = next_line(&lines, &mut cursor, eof, "$triangles")?;
        let v = parse_indices(content, line, 3)?;
        triangles.push([v[0], v[1], v[2]]);
    }

    let edge_count = expect_section(&lines, &mut cursor, eof, "boundary_edges")?;
    let mut boundary_edges = Vec::with_capacity(edge_count);
    for _ in 0..edge_count {
        let (line, content) = next_line(&lines, &mut cursor, eof, "$boundary_edges")?;
        let v = parse_indices(content, line, 2)?;
        boundary_edges.push([v[0], v[1]]);
    }

    if let Some(&(line, content)) = lines.get(cursor) {
        return Err(Error::Parse {
            line,
            message: format!("trailing content `{content}`"),
        });
    }

    let mut mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
    };
    // reorient clockwise triangles before validation
    for tri in &mut mesh.triangles {
        if tri.iter().all(|&i| i < mesh.nodes.len())
            && signed_area(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]) < 0.0
        {
            tri.swap(1, 2);
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

fn next_line<'a>(
    lines: &[(usize, &'a str)],
    cursor: &mut usize,
    eof: usize,
    context: &str,
) -> Result<(usize, &'a str)> {
    match lines.get(*cursor) {
        Some(&(line, content)) => {
            *cursor += 1;
            Ok((line, content))
        }
        None => Err(Error::Parse {
            line: eof,
            message: format!("unexpected end of file in {context}"),
        }),
    }
}

fn expect_section(
    lines: &[(usize, &str)],
    cursor: &mut usize,
    eof: usize,
    name: &str,
) -> Result<usize> {
    let (line, content) = next_line(lines, cursor, eof, name)?;
    if content != format!("${name}") {
        return Err(Error::Parse {
            line,
            message: format!("expected `${name}`, found `{content}`"),
        });
    }
    let (line, content) = next_line(lines, cursor, eof, name)?;
    content.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid count `{content}`"),
    })
}

fn parse_indices(content: &str, line: usize, count: usize) -> Result<Vec<usize>> {
    let parsed: std::result::Result<Vec<usize>, _> =
        content.split_whitespace().map(str::parse).collect();
    match parsed {
        Ok(v) if v.len() == count => Ok(v),
        Ok(v) => Err(Error::Parse {
            line,
            message: format!("expected {count} indices, found {}", v.len()),
        }),
        Err(_) => Err(Error::Parse {
            line,
            message: "invalid index".into(),
        }),
    }
}

/// Serializes a mesh in the format accepted by [`load_mesh`]. Coordinates are
/// written with 17 significant digits so a round trip is exact.
pub fn mesh_to_text(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "$nodes");
    let _ = writeln!(out, "{}", mesh.nodes.len());
    for (x, y) in &mesh.nodes {
        let _ = writeln!(out, "{x:.16e} {y:.16e}");
    }
    let _ = writeln!(out, "$triangles");
    let _ = writeln!(out, "{}", mesh.triangles.len());
    for tri in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "$boundary_edges");
    let _ = writeln!(out, "{}", mesh.boundary_edges.len());
    for edge in &mesh.boundary_edges {
        let _ = writeln!(out, "{} {}", edge[0], edge[1]);
    }
    out
}

pub fn mesh_stats(mesh: &Mesh) -> MeshStats {
    let mut h_max = 0.0f64;
    let mut min_angle = f64::INFINITY;
    for tri in &mesh.triangles {
        for k in 0..3 {
            let a = mesh.nodes[tri[k]];
            let b = mesh.nodes[tri[(k + 1) % 3]];
            let c = mesh.nodes[tri[(k + 2) % 3]];
            let u = (b.0 - a.0, b.1 - a.1);
            let v = (c.0 - a.0, c.1 - a.1);
            let len_u = (u.0 * u.0 + u.1 * u.1).sqrt();
            h_max = h_max.max(len_u);
            let len_v = (v.0 * v.0 + v.1 * v.1).sqrt();
            let cos = ((u.0 * v.0 + u.1 * v.1) / (len_u * len_v)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos().to_degrees());
        }
    }
    MeshStats {
        node_count: mesh.nodes.len(),
        triangle_count: mesh.triangles.len(),
        boundary_edge_count: mesh.boundary_edges.len(),
        min_angle,
        h_max,
    }
}
