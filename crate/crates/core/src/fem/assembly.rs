//! Element stiffness, global sparse assembly and stress recovery for 8-node
//! hexahedra with full 2×2×2 quadrature.

use crate::error::{Error, Result};
use crate::geometry::{det3, gauss_points, inv3, jacobian, shape_derivatives, Mesh, Vec3};
use crate::materials::MaterialProps;

/// Symmetric sparse matrix in compressed-row form with a 3×3 block pattern
/// derived from node adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradients of the shape functions in physical coordinates and the
/// Jacobian determinant at one Gauss point.
pub(crate) struct PointGradients {
    pub grads: [Vec3; 8],
    pub det: f64,
}

pub(crate) fn point_gradients(coords: &[Vec3; 8], xi: Vec3) -> PointGradients {
    let dn = shape_derivatives(xi);
    let j = jacobian(coords, &dn);
    let det = det3(&j);
    let inv = inv3(&j, det);
    let mut grads = [[0.0; 3]; 8];
    for a in 0..8 {
        // dN/dx_i = dN/dξ_k (J⁻¹)_ki
        for i in 0..3 {
            grads[a][i] = dn[a][0] * inv[0][i] + dn[a][1] * inv[1][i] + dn[a][2] * inv[2][i];
        }
    }
    PointGradients { grads, det }
}

/// 24×24 element stiffness, dof order (node, axis).
pub fn element_stiffness(coords: &[Vec3; 8], material: &MaterialProps) -> Result<[[f64; 24]; 24]> {
    let (lambda, mu) = material.lame();
    let mut ke = [[0.0; 24]; 24];
    for gp in gauss_points() {
        let PointGradients { grads, det } = point_gradients(coords, gp);
        if !(det > 0.0) {
            return Err(Error::MeshingFailure(format!("non-positive Jacobian {det:e} at Gauss point")));
        }
        for a in 0..8 {
            let ga = grads[a];
            for b in 0..8 {
                let gb = grads[b];
                let dot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
                for i in 0..3 {
                    for j in 0..3 {
                        let mut k = lambda * ga[i] * gb[j] + mu * ga[j] * gb[i];
                        if i == j {
                            k += mu * dot;
                        }
                        ke[3 * a + i][3 * b + j] += k * det;
                    }
                }
            }
        }
    }
    Ok(ke)
}

/// Sorted node neighbourhoods (including the node itself).
fn node_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); mesh.nodes.len()];
    for conn in &mesh.elements {
        for &a in conn {
            adj[a].extend_from_slice(conn);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

pub fn assemble_stiffness(mesh: &Mesh, material: &MaterialProps) -> Result<CsrMatrix> {
    let adj = node_adjacency(mesh);
    let n = 3 * mesh.nodes.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for list in &adj {
        for _axis in 0..3 {
            for &m in list {
                col_idx.extend_from_slice(&[3 * m, 3 * m + 1, 3 * m + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let mut values = vec![0.0; col_idx.len()];
    for (e, conn) in mesh.elements.iter().enumerate() {
        let ke = element_stiffness(&mesh.element_coords(e), material)
            .map_err(|err| Error::MeshingFailure(format!("element {e}: {err}")))?;
        for (a, &na) in conn.iter().enumerate() {
            let list = &adj[na];
            for (b, &nb) in conn.iter().enumerate() {
                let slot = list.binary_search(&nb).expect("neighbour present");
                for i in 0..3 {
                    let start = row_ptr[3 * na + i] + 3 * slot;
                    for j in 0..3 {
                        values[start + j] += ke[3 * a + i][3 * b + j];
                    }
                }
            }
        }
    }
    Ok(CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    })
}

/// Stress (σxx, σyy, σzz, τxy, τyz, τzx) at the eight Gauss points of every
/// element, in element order.
pub fn gauss_point_stresses(mesh: &Mesh, material: &MaterialProps, u: &[f64]) -> Vec<[f64; 6]> {
    let (lambda, mu) = material.lame();
    let mut out = Vec::with_capacity(8 * mesh.elements.len());
    for (e, conn) in mesh.elements.iter().enumerate() {
        let coords = mesh.element_coords(e);
        for gp in gauss_points() {
            let g = point_gradients(&coords, gp).grads;
            // displacement gradient H_ij = ∂u_i/∂x_j
            let mut h = [[0.0; 3]; 3];
            for (a, &node) in conn.iter().enumerate() {
                for i in 0..3 {
                    let ui = u[3 * node + i];
                    for j in 0..3 {
                        h[i][j] += ui * g[a][j];
                    }
                }
            }
            let tr = h[0][0] + h[1][1] + h[2][2];
            out.push([
                lambda * tr + 2.0 * mu * h[0][0],
                lambda * tr + 2.0 * mu * h[1][1],
                lambda * tr + 2.0 * mu * h[2][2],
                mu * (h[0][1] + h[1][0]),
                mu * (h[1][2] + h[2][1]),
                mu * (h[2][0] + h[0][2]),
            ]);
        }
    }
    out
}
