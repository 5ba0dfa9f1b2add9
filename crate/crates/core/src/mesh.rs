//! Uniform triangulations of the unit square with full edge connectivity.
//!
//! Vertices are numbered row-major. Each grid square is split into two
//! counterclockwise triangles along the chosen diagonal. Every edge carries a
//! single canonical unit normal pointing out of its first (lower-indexed)
//! adjacent cell; the second cell sees the negated normal.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Which diagonal splits each grid square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    #[default]
    Right,
    /// Lower-right to upper-left.
    Left,
}

/// One edge of the triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    /// Endpoints, ordered as traversed counterclockwise by the first cell.
    pub vertices: [usize; 2],
    /// First adjacent cell and, for interior edges, the second one.
    pub cells: (usize, Option<usize>),
    /// Local edge number of this edge inside each adjacent cell.
    pub local: (usize, Option<usize>),
    /// Unit normal, outward from `cells.0`.
    pub normal: [f64; 2],
    pub length: f64,
}

impl EdgeRecord {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Edge of a cell together with the orientation it has inside that cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellEdge {
    pub edge: usize,
    /// `+1` if the cell is the edge's first cell (and traverses it in stored
    /// order), `-1` otherwise.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex triples, counterclockwise.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<EdgeRecord>,
    /// Local edge `e` of a cell joins its vertices `e` and `(e + 1) % 3`.
    pub cell_to_edges: Vec<[CellEdge; 3]>,
    /// Number of squares per side, if built by [`Mesh::uniform_unit_square`].
    pub subdivisions: usize,
    pub diagonal: Diagonal,
}

/// Affine map from the reference triangle `{(0,0), (1,0), (0,1)}` onto a cell:
/// `x = B xi + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub jacobian: [[f64; 2]; 2],
    pub translation: [f64; 2],
    pub det: f64,
    /// `B^{-T}`, which maps reference gradients to physical gradients.
    pub inv_transpose: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn from_vertices(v0: [f64; 2], v1: [f64; 2], v2: [f64; 2]) -> Self {
        let jacobian = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        // B^{-1} = adj(B) / det, then transpose.
        let inv_transpose = [
            [jacobian[1][1] / det, -jacobian[1][0] / det],
            [-jacobian[0][1] / det, jacobian[0][0] / det],
        ];
        AffineMap { jacobian, translation: v0, det, inv_transpose }
    }

    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let b = &self.jacobian;
        [
            b[0][0] * xi[0] + b[0][1] * xi[1] + self.translation[0],
            b[1][0] * xi[0] + b[1][1] * xi[1] + self.translation[1],
        ]
    }

    /// Inverse map, physical point to reference coordinates.
    pub fn pullback(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.translation[0], x[1] - self.translation[1]];
        // B^{-1} = (B^{-T})^T
        let it = &self.inv_transpose;
        [it[0][0] * d[0] + it[1][0] * d[1], it[0][1] * d[0] + it[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let it = &self.inv_transpose;
        [it[0][0] * g[0] + it[0][1] * g[1], it[1][0] * g[0] + it[1][1] * g[1]]
    }
}

/// Point on an edge: parameter `t` in `[0, 1]` maps to `(1 - t) v0 + t v1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

impl EdgeGeometry {
    pub fn point(&self, t: f64) -> [f64; 2] {
        [
            (1.0 - t) * self.start[0] + t * self.end[0],
            (1.0 - t) * self.start[1] + t * self.end[1],
        ]
    }
}

impl Mesh {
    /// Uniform `n x n` square grid on `[0,1]^2`, each square cut along `diagonal`.
    pub fn uniform_unit_square(n: usize, diagonal: Diagonal) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidRefinement(n));
        }
        let nf = n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / nf, j as f64 / nf]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                match diagonal {
                    Diagonal::Right => {
                        cells.push([v00, v10, v11]);
                        cells.push([v00, v11, v01]);
                    }
                    Diagonal::Left => {
                        cells.push([v00, v10, v01]);
                        cells.push([v10, v11, v01]);
                    }
                }
            }
        }
        let mut mesh = Self::from_cells(vertices, cells)?;
        mesh.subdivisions = n;
        mesh.diagonal = diagonal;
        Ok(mesh)
    }

    /// Build connectivity for an arbitrary counterclockwise triangle list.
    pub fn from_cells(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> Result<Mesh> {
        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<EdgeRecord> = Vec::new();
        let mut cell_to_edges = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange { what: "vertex", index: v, len: vertices.len() });
                }
            }
            let map = AffineMap::from_vertices(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(map.det > 0.0) {
                return Err(Error::DegenerateCell { cell: c, det: map.det });
            }
            let mut local = [CellEdge { edge: 0, sign: 1 }; 3];
            for (e, slot) in local.iter_mut().enumerate() {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let key = if a < b { (a, b) } else { (b, a) };
                match lookup.get(&key) {
                    Some(&idx) => {
                        let rec = &mut edges[idx];
                        if rec.cells.1.is_some() {
                            return Err(Error::InvalidProblem(alloc::format!(
                                "edge ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        rec.cells.1 = Some(c);
                        rec.local.1 = Some(e);
                        *slot = CellEdge { edge: idx, sign: -1 };
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                        let length = math::hypot(dx, dy);
                        edges.push(EdgeRecord {
                            vertices: [a, b],
                            cells: (c, None),
                            local: (e, None),
                            normal: [dy / length, -dx / length],
                            length,
                        });
                        lookup.insert(key, edges.len() - 1);
                        *slot = CellEdge { edge: edges.len() - 1, sign: 1 };
                    }
                }
            }
            cell_to_edges.push(local);
        }
        Ok(Mesh { vertices, cells, edges, cell_to_edges, subdivisions: 0, diagonal: Diagonal::Right })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.num_edges() - self.num_boundary_edges()
    }

    pub fn cell_vertices(&self, cell: usize) -> [[f64; 2]; 3] {
        let t = self.cells[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let v = self.cell_vertices(cell);
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }

    pub fn affine_map(&self, cell: usize) -> Result<AffineMap> {
        if cell >= self.cells.len() {
            return Err(Error::IndexOutOfRange { what: "cell", index: cell, len: self.cells.len() });
        }
        let v = self.cell_vertices(cell);
        let map = AffineMap::from_vertices(v[0], v[1], v[2]);
        if !(map.det > 0.0) {
            return Err(Error::DegenerateCell { cell, det: map.det });
        }
        Ok(map)
    }

    /// All affine maps, in cell order. Connectivity construction already
    /// rejected degenerate cells.
    pub fn affine_maps(&self) -> Vec<AffineMap> {
        (0..self.num_cells())
            .map(|c| {
                let v = self.cell_vertices(c);
                AffineMap::from_vertices(v[0], v[1], v[2])
            })
            .collect()
    }

    pub fn edge_geometry(&self, edge: usize) -> Result<EdgeGeometry> {
        let rec = self
            .edges
            .get(edge)
            .ok_or(Error::IndexOutOfRange { what: "edge", index: edge, len: self.edges.len() })?;
        Ok(EdgeGeometry {
            start: self.vertices[rec.vertices[0]],
            end: self.vertices[rec.vertices[1]],
            normal: rec.normal,
            length: rec.length,
        })
    }

    /// Outward unit normal of `cell` on its local edge `local`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> [f64; 2] {
        let ce = self.cell_to_edges[cell][local];
        let n = self.edges[ce.edge].normal;
        let s = f64::from(ce.sign);
        [s * n[0], s * n[1]]
    }

    /// Largest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Index of a cell containing `x`, by brute-force barycentric test.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        (0..self.num_cells()).find(|&c| {
            let v = self.cell_vertices(c);
            let m = AffineMap::from_vertices(v[0], v[1], v[2]);
            let r = m.pullback(x);
            let tol = 1e-12;
            r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh_counts() {
        let m = Mesh::uniform_unit_square(1, Diagonal::Right).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.num_interior_edges(), 1);
        assert_eq!(m.num_boundary_edges(), 4);
    }

    #[test]
    fn n4_counts_follow_euler_relation() {
        for diag in [Diagonal::Right, Diagonal::Left] {
            let m = Mesh::uniform_unit_square(4, diag).unwrap();
            assert_eq!(m.num_vertices(), 25);
            assert_eq!(m.num_cells(), 32);
            // V - E + C = 1  =>  E = 25 + 32 - 1
            assert_eq!(m.num_edges(), 56);
            assert_eq!(m.num_interior_edges(), 40);
            assert_eq!(m.num_boundary_edges(), 16);
        }
    }

    #[test]
    fn n32_cell_count() {
        assert_eq!(Mesh::uniform_unit_square(32, Diagonal::Right).unwrap().num_cells(), 2048);
    }

    #[test]
    fn zero_refinement_rejected() {
        assert_eq!(Mesh::uniform_unit_square(0, Diagonal::Right), Err(Error::InvalidRefinement(0)));
    }

    #[test]
    fn reference_and_scaled_maps() {
        let m = AffineMap::from_vertices([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert_eq!(m.jacobian, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.det, 1.0);
        let h = 0.25;
        let m = AffineMap::from_vertices([0.0, 0.0], [h, 0.0], [0.0, h]);
        assert!((m.det - h * h).abs() < 1e-16);
    }

    #[test]
    fn uniform_cells_have_det_one_over_n_squared() {
        let n = 6;
        let mesh = Mesh::uniform_unit_square(n, Diagonal::Left).unwrap();
        for c in 0..mesh.num_cells() {
            let map = mesh.affine_map(c).unwrap();
            assert!((map.det - 1.0 / (n * n) as f64).abs() < 1e-15);
            let v = mesh.cell_vertices(c);
            for (xi, x) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().zip(v.iter()) {
                let y = map.map(*xi);
                assert!((y[0] - x[0]).abs() < 1e-15 && (y[1] - x[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_cell_reported() {
        let verts = alloc::vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let err = Mesh::from_cells(verts, alloc::vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn edge_geometry_examples() {
        // Single reference cell: edges (0,0)-(1,0), (1,0)-(0,1), (0,1)-(0,0).
        let mesh = Mesh::from_cells(
            alloc::vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            alloc::vec![[0, 1, 2]],
        )
        .unwrap();
        let bottom = mesh.edge_geometry(0).unwrap();
        assert_eq!(bottom.normal, [0.0, -1.0]);
        assert_eq!(bottom.length, 1.0);
        let diag = mesh.edge_geometry(1).unwrap();
        assert!((diag.length - 2f64.sqrt()).abs() < 1e-15);
        let left = mesh.edge_geometry(2).unwrap();
        assert_eq!(left.normal, [-1.0, 0.0]);
        assert_eq!(left.length, 1.0);
        assert_eq!(bottom.point(0.5), [0.5, 0.0]);
        assert!(mesh.edge_geometry(3).is_err());
    }

    #[test]
    fn cell_index_checked() {
        let mesh = Mesh::uniform_unit_square(1, Diagonal::Right).unwrap();
        assert!(matches!(mesh.affine_map(2), Err(Error::IndexOutOfRange { .. })));
    }
}
