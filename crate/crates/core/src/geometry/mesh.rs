//! Trilinear hexahedral meshes and the small amount of vector algebra the
//! rest of the crate needs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Reference coordinates of the eight hexahedron corners.
pub const HEX_CORNERS: [Vec3; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local corner indices of the six element faces, ordered so that the
/// right-hand rule gives the outward normal.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

pub const GAUSS_1D: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// The 2×2×2 Gauss points (unit weights).
pub fn gauss_points() -> [Vec3; 8] {
    let g = GAUSS_1D;
    let mut out = [[0.0; 3]; 8];
    let mut k = 0;
    for &z in &g {
        for &y in &g {
            for &x in &g {
                out[k] = [x, y, z];
                k += 1;
            }
        }
    }
    out
}

pub fn shape_functions(xi: Vec3) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        n[a] = 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]);
    }
    n
}

/// Derivatives dN_a/dξ_j.
pub fn shape_derivatives(xi: Vec3) -> [Vec3; 8] {
    let mut d = [[0.0; 3]; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        d[a] = [
            0.125 * c[0] * f[1] * f[2],
            0.125 * c[1] * f[0] * f[2],
            0.125 * c[2] * f[0] * f[1],
        ];
    }
    d
}

/// Jacobian J_ij = ∂x_i/∂ξ_j.
pub fn jacobian(coords: &[Vec3; 8], dn: &[Vec3; 8]) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for a in 0..8 {
        for i in 0..3 {
            for k in 0..3 {
                j[i][k] += coords[a][i] * dn[a][k];
            }
        }
    }
    j
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let inv_det = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

/// Node coordinates plus 8-node hexahedral connectivity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 8]>,
}

impl Mesh {
    pub fn element_coords(&self, e: usize) -> [Vec3; 8] {
        let conn = &self.elements[e];
        let mut c = [[0.0; 3]; 8];
        for (a, &n) in conn.iter().enumerate() {
            c[a] = self.nodes[n];
        }
        c
    }

    /// Smallest Jacobian determinant over the Gauss points of element `e`.
    pub fn min_jacobian(&self, e: usize) -> f64 {
        let coords = self.element_coords(e);
        gauss_points()
            .iter()
            .map(|&gp| det3(&jacobian(&coords, &shape_derivatives(gp))))
            .fold(f64::INFINITY, f64::min)
    }

    /// Element volume by 2×2×2 quadrature; exact for trilinear maps.
    pub fn element_volume(&self, e: usize) -> f64 {
        let coords = self.element_coords(e);
        gauss_points()
            .iter()
            .map(|&gp| det3(&jacobian(&coords, &shape_derivatives(gp))))
            .sum()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_volume(e)).sum()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm(sub(hi, lo))
    }

    /// Element faces that belong to exactly one element, in element order,
    /// with corner ordering giving outward normals.
    pub fn exterior_faces(&self) -> Vec<(usize, [usize; 4])> {
        let mut count: HashMap<[usize; 4], usize> = HashMap::new();
        for conn in &self.elements {
            for f in HEX_FACES {
                *count.entry(face_key(conn, f)).or_default() += 1;
            }
        }
        let mut out = Vec::new();
        for (e, conn) in self.elements.iter().enumerate() {
            for f in HEX_FACES {
                if count[&face_key(conn, f)] == 1 {
                    out.push((e, [conn[f[0]], conn[f[1]], conn[f[2]], conn[f[3]]]));
                }
            }
        }
        out
    }
}

fn face_key(conn: &[usize; 8], f: [usize; 4]) -> [usize; 4] {
    let mut k = [conn[f[0]], conn[f[1]], conn[f[2]], conn[f[3]]];
    k.sort_unstable();
    k
}

/// Area-weighted normal of a bilinear quad, integrated exactly (the cross
/// product of the two diagonals halved).
pub fn quad_area_vector(p: &[Vec3; 4]) -> Vec3 {
    scale(cross(sub(p[2], p[0]), sub(p[3], p[1])), 0.5)
}

pub fn quad_centroid(p: &[Vec3; 4]) -> Vec3 {
    scale(add(add(p[0], p[1]), add(p[2], p[3])), 0.25)
}

/// Distance from `q` to the quad, treating it as the two triangles
/// (p0, p1, p2) and (p0, p2, p3).
pub fn point_quad_distance(q: Vec3, p: &[Vec3; 4]) -> f64 {
    point_triangle_distance(q, p[0], p[1], p[2]).min(point_triangle_distance(q, p[0], p[2], p[3]))
}

pub fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    norm(sub(p, closest_point_on_triangle(p, a, b, c)))
}

fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}
