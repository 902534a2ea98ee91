//! Structured simplicial meshes on axis-aligned boxes (N = 1, 2) and on
//! periodic cells.
//!
//! Vertex `(i, j)` of an `nx × ny` grid has index `i + j * (nx + 1)`. Each grid
//! square is split along the diagonal from its lower-left to its upper-right
//! corner.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("unsupported dimension {0}; only N = 1 and N = 2 are supported")]
    Dimension(usize),
    #[error("degenerate box along axis {axis}: lo = {lo}, hi = {hi}")]
    DegenerateBox { axis: usize, lo: f64, hi: f64 },
    #[error("subdivisions must be at least {min}, got {got}")]
    Subdivisions { min: usize, got: usize },
    #[error("box and subdivision lists have mismatched lengths")]
    Shape,
}

/// Conforming simplicial mesh of a box.
#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    cells: [usize; 2],
    vertices: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    volumes: Vec<f64>,
    // gradients of the barycentric basis functions, one row per local vertex
    grads: Vec<[[f64; 2]; 3]>,
}

impl Mesh {
    /// Builds a mesh of `[lo_i, hi_i]` with `subdivisions[i]` cells along axis `i`.
    pub fn build(lo: &[f64], hi: &[f64], subdivisions: &[usize]) -> Result<Mesh, MeshError> {
        let dim = lo.len();
        if !(1..=2).contains(&dim) {
            return Err(MeshError::Dimension(dim));
        }
        if hi.len() != dim || subdivisions.len() != dim {
            return Err(MeshError::Shape);
        }
        for axis in 0..dim {
            if !(lo[axis] < hi[axis]) || !lo[axis].is_finite() || !hi[axis].is_finite() {
                return Err(MeshError::DegenerateBox {
                    axis,
                    lo: lo[axis],
                    hi: hi[axis],
                });
            }
            if subdivisions[axis] < 1 {
                return Err(MeshError::Subdivisions {
                    min: 1,
                    got: subdivisions[axis],
                });
            }
        }
        let mut b_lo = [0.0; 2];
        let mut b_hi = [0.0; 2];
        let mut cells = [1usize; 2];
        for axis in 0..dim {
            b_lo[axis] = lo[axis];
            b_hi[axis] = hi[axis];
            cells[axis] = subdivisions[axis];
        }
        Ok(if dim == 1 {
            Self::build_1d(b_lo, b_hi, cells)
        } else {
            Self::build_2d(b_lo, b_hi, cells)
        })
    }

    /// Unit box `(0,1)^dim` with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Mesh, MeshError> {
        Self::build(&vec![0.0; dim], &vec![1.0; dim], &vec![n; dim])
    }

    fn coordinate(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * (i as f64) / (n as f64)
        }
    }

    fn build_1d(lo: [f64; 2], hi: [f64; 2], cells: [usize; 2]) -> Mesh {
        let n = cells[0];
        let vertices: Vec<[f64; 2]> = (0..=n)
            .map(|i| [Self::coordinate(lo[0], hi[0], i, n), 0.0])
            .collect();
        let elements: Vec<[usize; 3]> = (0..n).map(|i| [i, i + 1, usize::MAX]).collect();
        let mut boundary = vec![false; n + 1];
        boundary[0] = true;
        boundary[n] = true;
        Self::finish(1, lo, hi, cells, vertices, elements, boundary)
    }

    fn build_2d(lo: [f64; 2], hi: [f64; 2], cells: [usize; 2]) -> Mesh {
        let [nx, ny] = cells;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = Self::coordinate(lo[1], hi[1], j, ny);
            for i in 0..=nx {
                vertices.push([Self::coordinate(lo[0], hi[0], i, nx), y]);
                boundary.push(i == 0 || i == nx || j == 0 || j == ny);
            }
        }
        let idx = |i: usize, j: usize| i + j * (nx + 1);
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        Self::finish(2, lo, hi, cells, vertices, elements, boundary)
    }

    fn finish(
        dim: usize,
        lo: [f64; 2],
        hi: [f64; 2],
        cells: [usize; 2],
        vertices: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Mesh {
        let mut volumes = Vec::with_capacity(elements.len());
        let mut grads = Vec::with_capacity(elements.len());
        for el in &elements {
            let (vol, g) = if dim == 1 {
                let h = vertices[el[1]][0] - vertices[el[0]][0];
                (h, [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]])
            } else {
                let p0 = vertices[el[0]];
                let p1 = vertices[el[1]];
                let p2 = vertices[el[2]];
                let (ax, ay) = (p1[0] - p0[0], p1[1] - p0[1]);
                let (bx, by) = (p2[0] - p0[0], p2[1] - p0[1]);
                let det = ax * by - ay * bx;
                // rows of the inverse Jacobian transpose
                let g1 = [by / det, -bx / det];
                let g2 = [-ay / det, ax / det];
                let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
                (0.5 * det, [g0, g1, g2])
            };
            volumes.push(vol);
            grads.push(g);
        }
        Mesh {
            dim,
            lo,
            hi,
            cells,
            vertices,
            elements,
            boundary,
            volumes,
            grads,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn subdivisions(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    /// Grid spacing along each axis.
    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| (self.hi[a] - self.lo[a]) / self.cells[a] as f64)
            .collect()
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v][..self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.volumes[e]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Gradients of the local basis functions on element `e`, one per local vertex.
    pub fn basis_gradients(&self, e: usize) -> &[[f64; 2]] {
        &self.grads[e][..self.dim + 1]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let el = self.element(e);
        let k = el.len() as f64;
        let mut c = [0.0; 2];
        for &v in el {
            for a in 0..self.dim {
                c[a] += self.vertices[v][a] / k;
            }
        }
        c
    }

    /// Maps a point given in barycentric coordinates of element `e` to physical space.
    pub fn map_point(&self, e: usize, bary: &[f64]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (k, &v) in self.element(e).iter().enumerate() {
            for a in 0..self.dim {
                p[a] += bary[k] * self.vertices[v][a];
            }
        }
        p
    }

    /// Gradient of the P1 function with nodal values `u` on element `e`.
    pub fn gradient(&self, e: usize, u: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, &v) in self.element(e).iter().enumerate() {
            let gk = self.grads[e][k];
            g[0] += u[v] * gk[0];
            g[1] += u[v] * gk[1];
        }
        g
    }

    /// Evaluates the P1 interpolant with nodal values `u` at point `p` inside the box.
    pub fn interpolate(&self, u: &[f64], p: &[f64]) -> f64 {
        let mut idx = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..self.dim {
            let h = (self.hi[a] - self.lo[a]) / self.cells[a] as f64;
            let t = ((p[a] - self.lo[a]) / h).clamp(0.0, self.cells[a] as f64);
            let i = (t.floor() as usize).min(self.cells[a] - 1);
            idx[a] = i;
            frac[a] = t - i as f64;
        }
        if self.dim == 1 {
            return (1.0 - frac[0]) * u[idx[0]] + frac[0] * u[idx[0] + 1];
        }
        let nx = self.cells[0];
        let at = |i: usize, j: usize| u[i + j * (nx + 1)];
        let (i, j) = (idx[0], idx[1]);
        let (s, t) = (frac[0], frac[1]);
        if s >= t {
            // lower triangle (v00, v10, v11)
            (1.0 - s) * at(i, j) + (s - t) * at(i + 1, j) + t * at(i + 1, j + 1)
        } else {
            // upper triangle (v00, v11, v01)
            (1.0 - t) * at(i, j) + s * at(i + 1, j + 1) + (t - s) * at(i, j + 1)
        }
    }
}

/// Mesh of the closed periodic cell `[0, L]^N` with opposite faces identified.
#[derive(Clone, Debug)]
pub struct PeriodicMesh {
    mesh: Mesh,
    period: f64,
    n: usize,
    dof_of_vertex: Vec<usize>,
    n_dofs: usize,
}

impl PeriodicMesh {
    /// Unit cell `(0,1)^N` with `n` subdivisions per axis.
    pub fn build(n: usize, dim: usize) -> Result<PeriodicMesh, MeshError> {
        Self::with_period(n, dim, 1.0)
    }

    /// Cell `(0,L)^N` with `n` subdivisions per axis.
    pub fn with_period(n: usize, dim: usize, period: f64) -> Result<PeriodicMesh, MeshError> {
        if !(1..=2).contains(&dim) {
            return Err(MeshError::Dimension(dim));
        }
        if n < 2 {
            return Err(MeshError::Subdivisions { min: 2, got: n });
        }
        let mesh = Mesh::build(&vec![0.0; dim], &vec![period; dim], &vec![n; dim])?;
        let dof_of_vertex = (0..mesh.n_vertices())
            .map(|v| {
                let i = v % (n + 1);
                let j = v / (n + 1);
                (i % n) + (j % n) * n
            })
            .collect();
        Ok(PeriodicMesh {
            mesh,
            period,
            n,
            dof_of_vertex,
            n_dofs: n.pow(dim as u32),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn cell_volume(&self) -> f64 {
        self.mesh.box_volume()
    }

    pub fn dof(&self, vertex: usize) -> usize {
        self.dof_of_vertex[vertex]
    }

    pub fn dof_map(&self) -> &[usize] {
        &self.dof_of_vertex
    }

    /// Vertex that represents each periodic dof (the one with all indices < n).
    pub fn representative(&self, dof: usize) -> usize {
        let i = dof % self.n;
        let j = dof / self.n;
        i + j * (self.n + 1)
    }

    /// Expands per-dof values to per-vertex values on the closed cell.
    pub fn to_vertices(&self, dof_values: &[f64]) -> Vec<f64> {
        self.dof_of_vertex.iter().map(|&d| dof_values[d]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_counts() {
        let m = Mesh::unit(1, 4).unwrap();
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.n_elements(), 4);
        assert_eq!(m.boundary_vertices(), vec![0, 4]);
    }

    #[test]
    fn unit_square_counts() {
        let m = Mesh::unit(2, 2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.boundary_vertices().len(), 8);
        assert!(!m.is_boundary(4));
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(matches!(
            Mesh::build(&[1.0], &[1.0], &[4]),
            Err(MeshError::DegenerateBox { .. })
        ));
        assert!(matches!(
            Mesh::build(&[0.0; 3], &[1.0; 3], &[2; 3]),
            Err(MeshError::Dimension(3))
        ));
        assert!(Mesh::build(&[0.0], &[1.0], &[0]).is_err());
    }

    #[test]
    fn positive_volumes_sum_to_box() {
        let m = Mesh::build(&[-1.0, 0.5], &[2.0, 1.75], &[7, 5]).unwrap();
        assert!(m.volumes().iter().all(|&v| v > 0.0));
        let total: f64 = m.volumes().iter().sum();
        assert!((total - m.box_volume()).abs() <= 1e-13 * m.box_volume());
    }

    #[test]
    fn cell_mesh_counts() {
        let c = PeriodicMesh::build(2, 1).unwrap();
        assert_eq!(c.mesh().n_vertices(), 3);
        assert_eq!(c.n_dofs(), 2);
        assert_eq!(c.dof(2), c.dof(0));
        let c = PeriodicMesh::build(4, 2).unwrap();
        assert_eq!(c.mesh().n_vertices(), 25);
        assert_eq!(c.n_dofs(), 16);
        assert!(matches!(PeriodicMesh::build(1, 2), Err(MeshError::Subdivisions { .. })));
    }

    #[test]
    fn periodic_twins_and_corners() {
        let n = 5;
        let c = PeriodicMesh::build(n, 2).unwrap();
        let v = |i: usize, j: usize| i + j * (n + 1);
        for k in 0..=n {
            assert_eq!(c.dof(v(0, k)), c.dof(v(n, k)));
            assert_eq!(c.dof(v(k, 0)), c.dof(v(k, n)));
        }
        let corner = c.dof(v(0, 0));
        assert!([v(n, 0), v(0, n), v(n, n)].iter().all(|&w| c.dof(w) == corner));
        // the map is a projection onto representatives
        for vert in 0..c.mesh().n_vertices() {
            let d = c.dof(vert);
            assert_eq!(c.dof(c.representative(d)), d);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let m = Mesh::build(&[0.0, 0.0], &[2.0, 1.0], &[4, 3]).unwrap();
        let u: Vec<f64> = (0..m.n_vertices())
            .map(|v| 1.0 + 2.0 * m.vertex(v)[0] - 3.0 * m.vertex(v)[1])
            .collect();
        for p in [[0.3, 0.2], [1.99, 0.95], [0.0, 1.0], [1.25, 0.5]] {
            let exact = 1.0 + 2.0 * p[0] - 3.0 * p[1];
            assert!((m.interpolate(&u, &p) - exact).abs() < 1e-13);
        }
    }
}
