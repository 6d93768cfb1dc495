//! Friedrich-Keller triangulation of the unit square and P1 assembly with
//! homogeneous Dirichlet elimination.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const BOUNDARY_TOL: f64 = 1e-12;

/// Structured triangulation of `[0,1]^2` with `nx` nodes per direction.
///
/// Every grid square is cut along the diagonal from its lower-left to its
/// upper-right corner. Nodes are numbered row by row, `x1` fastest.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nx: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    interior_map: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
}

impl TriMesh {
    pub fn new(nx: usize) -> Result<Self> {
        if nx < 3 {
            return Err(Error::InvalidParameter(format!(
                "mesh needs at least 3 nodes per direction, got {nx}"
            )));
        }
        let h = 1.0 / (nx - 1) as f64;
        let coord = |i: usize| {
            if i == nx - 1 {
                1.0
            } else {
                i as f64 * h
            }
        };
        let mut nodes = Vec::with_capacity(nx * nx);
        for j in 0..nx {
            for i in 0..nx {
                nodes.push([coord(i), coord(j)]);
            }
        }
        let id = |i: usize, j: usize| j * nx + i;
        let mut triangles = Vec::with_capacity(2 * (nx - 1) * (nx - 1));
        for j in 0..nx - 1 {
            for i in 0..nx - 1 {
                let (n0, n1, n2, n3) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([n0, n1, n2]);
                triangles.push([n0, n2, n3]);
            }
        }
        let mut interior_map = vec![None; nodes.len()];
        let mut interior_nodes = Vec::with_capacity((nx - 2) * (nx - 2));
        for (g, p) in nodes.iter().enumerate() {
            let on_boundary = p
                .iter()
                .any(|&c| c.abs() < BOUNDARY_TOL || (c - 1.0).abs() < BOUNDARY_TOL);
            if !on_boundary {
                interior_map[g] = Some(interior_nodes.len());
                interior_nodes.push(g);
            }
        }
        Ok(Self {
            nx,
            h,
            nodes,
            triangles,
            interior_map,
            interior_nodes,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Interior DOF index of a global node, `None` on the boundary.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_map[node]
    }

    /// Global node index of every interior DOF, in DOF order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri].map(|k| self.nodes[k]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Evaluates `f` at the interior nodes.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior_nodes
            .iter()
            .map(|&g| {
                let [x1, x2] = self.nodes[g];
                f(x1, x2)
            })
            .collect()
    }

    /// Element mass and stiffness matrices of triangle `tri`.
    fn element_matrices(&self, tri: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
        let p = self.triangles[tri].map(|k| self.nodes[k]);
        let area = self.signed_area(tri);
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        let mut mass = [[0.0; 3]; 3];
        let mut stiff = [[0.0; 3]; 3];
        for a in 0..3 {
            for d in 0..3 {
                mass[a][d] = area / 12.0 * if a == d { 2.0 } else { 1.0 };
                stiff[a][d] = (b[a] * b[d] + c[a] * c[d]) / (4.0 * area);
            }
        }
        (mass, stiff)
    }

    /// Mass and stiffness matrices over all nodes, before boundary elimination.
    pub fn assemble_full(&self) -> Result<(CsrMatrix, CsrMatrix)> {
        let n = self.nodes.len();
        let mut tm = Vec::with_capacity(9 * self.triangles.len());
        let mut ta = Vec::with_capacity(9 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let (me, ae) = self.element_matrices(t);
            for a in 0..3 {
                for d in 0..3 {
                    tm.push((tri[a], tri[d], me[a][d]));
                    ta.push((tri[a], tri[d], ae[a][d]));
                }
            }
        }
        Ok((
            CsrMatrix::from_triplets(n, n, &tm)?,
            CsrMatrix::from_triplets(n, n, &ta)?,
        ))
    }

    /// Consistent P1 mass matrix `M` and stiffness matrix `A` of `-Δ`,
    /// restricted to the interior DOFs.
    pub fn assemble(&self) -> Result<(CsrMatrix, CsrMatrix)> {
        let n = self.n_interior();
        let mut tm = Vec::with_capacity(9 * self.triangles.len());
        let mut ta = Vec::with_capacity(9 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let (me, ae) = self.element_matrices(t);
            for a in 0..3 {
                let Some(ia) = self.interior_map[tri[a]] else { continue };
                for d in 0..3 {
                    let Some(id) = self.interior_map[tri[d]] else { continue };
                    tm.push((ia, id, me[a][d]));
                    ta.push((ia, id, ae[a][d]));
                }
            }
        }
        Ok((
            CsrMatrix::from_triplets(n, n, &tm)?,
            CsrMatrix::from_triplets(n, n, &ta)?,
        ))
    }
}
