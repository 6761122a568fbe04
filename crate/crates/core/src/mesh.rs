//! Structured triangulations of the L-shaped domain `(-1,1)^2 \ [0,1]x[0,1]`.
//!
//! The domain is the union of the three unit squares `[-1,0]x[-1,0]`,
//! `[0,1]x[-1,0]` and `[-1,0]x[0,1]`. At refinement level `k` each of them is
//! split into a `2^k x 2^k` grid of squares, and every small square is cut
//! along its bottom-left to top-right diagonal.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Largest level accepted by [`build_lshape`]; level 12 already has ~10^8 triangles.
pub const MAX_LEVEL: u32 = 12;

/// Exact area of the L-shaped domain.
pub const LSHAPE_AREA: f64 = 3.0;

const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("refinement level {level} exceeds capacity (max {max})")]
    Capacity { level: u32, max: u32 },
}

/// A 2D point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Conforming triangulation with boundary flags.
///
/// Triangles are stored counter-clockwise. Vertices are shared between
/// neighbouring triangles, so every interior edge belongs to exactly two
/// triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    level: u32,
}

/// Maps interior (free) vertices to consecutive degree-of-freedom indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    /// Number of degrees of freedom `m_h`.
    pub fn len(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_vertex.is_empty()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_to_dof[vertex]
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof]
    }

    pub fn vertex_to_dof(&self) -> &[Option<usize>] {
        &self.vertex_to_dof
    }

    pub fn dof_to_vertex(&self) -> &[usize] {
        &self.dof_to_vertex
    }
}

/// True iff `p` lies on one of the eight boundary segments of the L-shape.
pub fn on_lshape_boundary(p: Point) -> bool {
    let near = |a: f64, b: f64| (a - b).abs() <= BOUNDARY_TOL;
    let within = |a: f64, lo: f64, hi: f64| a >= lo - BOUNDARY_TOL && a <= hi + BOUNDARY_TOL;
    // outer box, lower and left parts
    (near(p.y, -1.0) && within(p.x, -1.0, 1.0))
        || (near(p.x, -1.0) && within(p.y, -1.0, 1.0))
        || (near(p.x, 1.0) && within(p.y, -1.0, 0.0))
        || (near(p.y, 1.0) && within(p.x, -1.0, 0.0))
        // reentrant corner segments
        || (near(p.y, 0.0) && within(p.x, 0.0, 1.0))
        || (near(p.x, 0.0) && within(p.y, 0.0, 1.0))
}

/// Builds the structured L-shape mesh at the given refinement level.
pub fn build_lshape(level: u32) -> Result<Mesh, MeshError> {
    if level > MAX_LEVEL {
        return Err(MeshError::Capacity {
            level,
            max: MAX_LEVEL,
        });
    }
    let cells = 1usize << level; // per unit length
    let n = 2 * cells; // grid cells per direction on [-1,1]
    let h = 1.0 / cells as f64;
    let coord = |i: usize| -1.0 + i as f64 * h;
    // grid point (i, j) is inside the closed L unless it is strictly in the removed quadrant
    let removed = |i: usize, j: usize| i > cells && j > cells;

    let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if !removed(i, j) {
                index[j * (n + 1) + i] = vertices.len();
                vertices.push(Point::new(coord(i), coord(j)));
            }
        }
    }

    let mut triangles = Vec::with_capacity(6 << (2 * level));
    for j in 0..n {
        for i in 0..n {
            // cell lies in the removed quadrant iff its lower-left corner is at x >= 0, y >= 0
            if i >= cells && j >= cells {
                continue;
            }
            let v00 = index[j * (n + 1) + i];
            let v10 = index[j * (n + 1) + i + 1];
            let v01 = index[(j + 1) * (n + 1) + i];
            let v11 = index[(j + 1) * (n + 1) + i + 1];
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let boundary = vertices.iter().map(|&p| on_lshape_boundary(p)).collect();
    Ok(Mesh {
        vertices,
        triangles,
        boundary,
        level,
    })
}

impl Mesh {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.boundary[vertex]
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t`; positive for counter-clockwise orientation.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Red refinement: every triangle is split into four congruent children
    /// through its edge midpoints.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(vertices[a].midpoint(vertices[b]));
                vertices.len() - 1
            })
        };

        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let boundary = vertices.iter().map(|&p| on_lshape_boundary(p)).collect();
        Mesh {
            vertices,
            triangles,
            boundary,
            level: self.level + 1,
        }
    }

    /// Numbers the non-boundary vertices in vertex order.
    pub fn interior_dof_map(&self) -> DofMap {
        let mut vertex_to_dof = vec![None; self.vertices.len()];
        let mut dof_to_vertex = Vec::new();
        for (v, &on_boundary) in self.boundary.iter().enumerate() {
            if !on_boundary {
                vertex_to_dof[v] = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        DofMap {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    /// Number of triangles adjacent to every undirected edge.
    pub fn edge_multiplicities(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *edges.entry((p.min(q), p.max(q))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Checks all structural invariants and returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for t in 0..self.num_triangles() {
            let area = self.signed_area(t);
            if area <= 0.0 {
                return Err(format!("triangle {t} has nonpositive signed area {area}"));
            }
        }
        let area = self.total_area();
        if (area - LSHAPE_AREA).abs() > 1e-12 {
            return Err(format!("total area {area} differs from {LSHAPE_AREA}"));
        }
        for ((a, b), count) in self.edge_multiplicities() {
            let on_boundary = count == 1;
            if count > 2 {
                return Err(format!("edge ({a},{b}) shared by {count} triangles"));
            }
            if on_boundary {
                let mid = self.vertices[a].midpoint(self.vertices[b]);
                if !on_lshape_boundary(mid) {
                    return Err(format!("boundary edge ({a},{b}) does not lie on the boundary"));
                }
            }
        }
        for (v, (&p, &flag)) in self.vertices.iter().zip(&self.boundary).enumerate() {
            if flag != on_lshape_boundary(p) {
                return Err(format!("vertex {v} has wrong boundary flag"));
            }
        }
        Ok(())
    }

    /// Text dump: one `v x y` line per vertex followed by one `t i j k` line per triangle.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.vertices {
            let _ = writeln!(out, "v {} {}", p.x, p.y);
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "t {a} {b} {c}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(mesh: &Mesh) -> (Vec<(i64, i64)>, Vec<[(i64, i64); 3]>) {
        // dyadic coordinates scaled to integers are exact
        let scale = (1u64 << (mesh.level() + 2)) as f64;
        let key = |p: Point| ((p.x * scale) as i64, (p.y * scale) as i64);
        let mut verts: Vec<_> = mesh.vertices().iter().map(|&p| key(p)).collect();
        verts.sort_unstable();
        let mut tris: Vec<_> = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut k = t.map(|v| key(mesh.vertices()[v]));
                k.sort_unstable();
                k
            })
            .collect();
        tris.sort_unstable();
        (verts, tris)
    }

    #[test]
    fn level_zero_counts() {
        let mesh = build_lshape(0).unwrap();
        assert_eq!(mesh.num_triangles(), 6);
        assert_eq!(mesh.num_vertices(), 8);
        assert!(mesh.boundary_flags().iter().all(|&b| b));
        assert_eq!(mesh.interior_dof_map().len(), 0);
    }

    #[test]
    fn level_one_has_five_interior_vertices() {
        let mesh = build_lshape(1).unwrap();
        assert_eq!(mesh.num_vertices(), 21);
        let dofs = mesh.interior_dof_map();
        assert_eq!(dofs.len(), 5);
        let mut interior: Vec<_> = dofs
            .dof_to_vertex()
            .iter()
            .map(|&v| mesh.vertices()[v])
            .map(|p| (p.x, p.y))
            .collect();
        interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            interior,
            vec![(-0.5, -0.5), (-0.5, 0.0), (-0.5, 0.5), (0.0, -0.5), (0.5, -0.5)]
        );
    }

    #[test]
    fn triangle_counts_quadruple() {
        for k in 0..=6 {
            assert_eq!(build_lshape(k).unwrap().num_triangles(), 6 * 4usize.pow(k));
        }
        assert_eq!(build_lshape(6).unwrap().num_triangles(), 24576);
    }

    #[test]
    fn invariants_hold_for_built_and_refined_meshes() {
        for k in 0..=5 {
            let mesh = build_lshape(k).unwrap();
            mesh.validate().unwrap();
            mesh.refine_uniform().validate().unwrap();
        }
    }

    #[test]
    fn refinement_matches_construction() {
        let mut refined = build_lshape(0).unwrap();
        for k in 1..=4 {
            refined = refined.refine_uniform();
            assert_eq!(refined.level(), k);
            assert_eq!(refined.num_triangles(), 6 * 4usize.pow(k));
            assert!((refined.total_area() - 3.0).abs() <= 1e-12);
            assert_eq!(canonical(&refined), canonical(&build_lshape(k).unwrap()));
        }
    }

    #[test]
    fn dof_indices_are_gap_free() {
        let mesh = build_lshape(3).unwrap();
        let dofs = mesh.interior_dof_map();
        let interior = mesh.boundary_flags().iter().filter(|&&b| !b).count();
        assert_eq!(dofs.len(), interior);
        for (d, &v) in dofs.dof_to_vertex().iter().enumerate() {
            assert_eq!(dofs.dof(v), Some(d));
        }
    }

    #[test]
    fn reentrant_corner_segments_are_boundary() {
        assert!(on_lshape_boundary(Point::new(0.0, 0.0)));
        assert!(on_lshape_boundary(Point::new(0.0, 0.75)));
        assert!(on_lshape_boundary(Point::new(0.25, 0.0)));
        assert!(!on_lshape_boundary(Point::new(-0.25, 0.0)));
        assert!(!on_lshape_boundary(Point::new(0.0, -0.25)));
    }

    #[test]
    fn rejects_excessive_level() {
        assert_eq!(
            build_lshape(13),
            Err(MeshError::Capacity { level: 13, max: 12 })
        );
    }

    #[test]
    fn text_dump_format() {
        let text = build_lshape(0).unwrap().to_text();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 14);
        assert_eq!(lines[0], "v -1 -1");
        assert_eq!(lines[8], "t 0 1 4");
    }
}
