//! Per-category mesh builders.
//!
//! Box-decomposable parts use a tensor grid with some cells removed; round
//! parts use a ring grid in cylindrical coordinates. Subdivision counts depend
//! only on the mesh density, so every parameterization of a category shares
//! one mesh topology.

use std::f64::consts::PI;

use super::mesh::{Mesh, Vec3};
use crate::error::{Error, Result};

pub(super) type Classifier = Box<dyn Fn(Vec3, Vec3) -> &'static str + Send + Sync>;

pub(super) struct Built {
    pub mesh: Mesh,
    pub classify: Classifier,
    pub volume: f64,
}

const BUILDERS: &[&str] = &[
    "flat_plate",
    "cantilever_box_beam",
    "l_bracket",
    "annular_flange",
    "solid_cylinder_bushing",
    "hex_prism_nut_blank",
];

pub(super) fn has_builder(id: &str) -> bool {
    BUILDERS.contains(&id)
}

pub(super) fn build(id: &str, p: &[f64], d: usize) -> Result<Built> {
    match id {
        "flat_plate" => flat_plate(p[0], p[1], p[2], d),
        "cantilever_box_beam" => box_beam(p[0], p[1], p[2], p[3], d),
        "l_bracket" => l_bracket(p[0], p[1], p[2], p[3], d),
        "annular_flange" => annular_flange(p[0], p[1], p[2], d),
        "solid_cylinder_bushing" => bushing(p[0], p[1], p[2], d),
        "hex_prism_nut_blank" => hex_nut(p[0], p[1], p[2], d),
        other => Err(Error::UnknownCategory(other.to_string())),
    }
}

/// One axis of a tensor grid: interval breakpoints and subdivisions per interval.
pub(crate) struct Axis {
    breaks: Vec<f64>,
    subdiv: Vec<usize>,
}

impl Axis {
    pub(crate) fn new(breaks: &[f64], subdiv: &[usize]) -> Self {
        assert_eq!(breaks.len(), subdiv.len() + 1);
        Self {
            breaks: breaks.to_vec(),
            subdiv: subdiv.to_vec(),
        }
    }

    /// Grid coordinates and, per cell, the interval it falls in.
    fn expand(&self) -> (Vec<f64>, Vec<usize>) {
        let mut coords = vec![self.breaks[0]];
        let mut interval = Vec::new();
        for (k, &n) in self.subdiv.iter().enumerate() {
            let (a, b) = (self.breaks[k], self.breaks[k + 1]);
            for i in 1..=n {
                coords.push(if i == n { b } else { a + (b - a) * i as f64 / n as f64 });
                interval.push(k);
            }
        }
        (coords, interval)
    }
}

/// Tensor-product hex grid keeping only the cells whose interval triple
/// passes `keep`. Nodes not touched by any kept cell are dropped.
pub(crate) fn block_mesh(axes: [Axis; 3], keep: impl Fn([usize; 3]) -> bool) -> Mesh {
    let (xs, ix) = axes[0].expand();
    let (ys, iy) = axes[1].expand();
    let (zs, iz) = axes[2].expand();
    let (nx, ny, nz) = (ix.len(), iy.len(), iz.len());
    let grid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

    let mut kept = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if keep([ix[i], iy[j], iz[k]]) {
                    kept.push([i, j, k]);
                }
            }
        }
    }
    let mut used = vec![false; (nx + 1) * (ny + 1) * (nz + 1)];
    for &[i, j, k] in &kept {
        for (di, dj, dk) in CELL_OFFSETS {
            used[grid(i + di, j + dj, k + dk)] = true;
        }
    }
    let mut id = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let g = grid(i, j, k);
                if used[g] {
                    id[g] = nodes.len();
                    nodes.push([xs[i], ys[j], zs[k]]);
                }
            }
        }
    }
    let elements = kept
        .iter()
        .map(|&[i, j, k]| CELL_OFFSETS.map(|(di, dj, dk)| id[grid(i + di, j + dj, k + dk)]))
        .collect();
    Mesh { nodes, elements }
}

const CELL_OFFSETS: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
];

/// Ring grid around the z axis. `radii(θ)` returns the inner and outer
/// boundary points' radii along the ray at angle θ.
fn ring_mesh(n_theta: usize, n_r: usize, zs: &[f64], radii: impl Fn(f64) -> (f64, f64)) -> Mesh {
    let per_layer = n_theta * (n_r + 1);
    let id = |i: usize, k: usize, j: usize| j * per_layer + (k % n_theta) * (n_r + 1) + i;
    let mut nodes = Vec::with_capacity(per_layer * zs.len());
    for &z in zs {
        for k in 0..n_theta {
            let theta = 2.0 * PI * k as f64 / n_theta as f64;
            let (r0, r1) = radii(theta);
            let (s, c) = theta.sin_cos();
            for i in 0..=n_r {
                let r = if i == n_r { r1 } else { r0 + (r1 - r0) * i as f64 / n_r as f64 };
                nodes.push([r * c, r * s, z]);
            }
        }
    }
    let mut elements = Vec::new();
    for j in 0..zs.len() - 1 {
        for k in 0..n_theta {
            for i in 0..n_r {
                elements.push([
                    id(i, k, j),
                    id(i + 1, k, j),
                    id(i + 1, k + 1, j),
                    id(i, k + 1, j),
                    id(i, k, j + 1),
                    id(i + 1, k, j + 1),
                    id(i + 1, k + 1, j + 1),
                    id(i, k + 1, j + 1),
                ]);
            }
        }
    }
    Mesh { nodes, elements }
}

/// Radius of the regular n-gon whose area equals that of a circle of radius `r`.
fn equal_area_radius(r: f64, n: usize) -> f64 {
    let n = n as f64;
    r * (2.0 * PI / (n * (2.0 * PI / n).sin())).sqrt()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn axis_tag(n: Vec3) -> Option<(usize, bool)> {
    (0..3).find(|&i| n[i].abs() > 0.9).map(|i| (i, n[i] > 0.0))
}

fn flat_plate(length: f64, width: f64, thickness: f64, d: usize) -> Result<Built> {
    let mesh = block_mesh(
        [
            Axis::new(&[0.0, length], &[4 * d]),
            Axis::new(&[0.0, width], &[2 * d]),
            Axis::new(&[0.0, thickness], &[d]),
        ],
        |_| true,
    );
    let classify: Classifier = Box::new(|_c, n| match axis_tag(n) {
        Some((0, false)) => "end_x0",
        Some((0, true)) => "end_x1",
        Some((2, true)) => "top",
        Some((2, false)) => "bottom",
        _ => "side",
    });
    Ok(Built {
        mesh,
        classify,
        volume: length * width * thickness,
    })
}

fn box_beam(length: f64, width: f64, height: f64, wall: f64, d: usize) -> Result<Built> {
    if 2.0 * wall >= width || 2.0 * wall >= height {
        return Err(Error::DegenerateGeometry(format!(
            "wall thickness {wall} leaves no cavity in a {width}×{height} section"
        )));
    }
    let w = d.div_ceil(2);
    let mesh = block_mesh(
        [
            Axis::new(&[0.0, length], &[4 * d]),
            Axis::new(&[0.0, wall, width - wall, width], &[w, d, w]),
            Axis::new(&[0.0, wall, height - wall, height], &[w, d, w]),
        ],
        |[_, j, k]| !(j == 1 && k == 1),
    );
    let tol = 1e-9 * (length + width + height);
    let classify: Classifier = Box::new(move |c, n| match axis_tag(n) {
        Some((0, false)) => "end_x0",
        Some((0, true)) => "end_x1",
        Some((2, true)) if near(c[2], height, tol) => "top",
        Some((2, false)) if near(c[2], 0.0, tol) => "bottom",
        Some((1, true)) if near(c[1], width, tol) => "side",
        Some((1, false)) if near(c[1], 0.0, tol) => "side",
        _ => "inner",
    });
    Ok(Built {
        mesh,
        classify,
        volume: length * (width * height - (width - 2.0 * wall) * (height - 2.0 * wall)),
    })
}

fn l_bracket(leg_length: f64, leg_height: f64, width: f64, t: f64, d: usize) -> Result<Built> {
    if t >= leg_length || t >= leg_height {
        return Err(Error::DegenerateGeometry(format!(
            "thickness {t} consumes a leg ({leg_length} × {leg_height})"
        )));
    }
    let mesh = block_mesh(
        [
            Axis::new(&[0.0, t, leg_length], &[d, 3 * d]),
            Axis::new(&[0.0, width], &[2 * d]),
            Axis::new(&[0.0, t, leg_height], &[d, 3 * d]),
        ],
        |[i, _, k]| !(i == 1 && k == 1),
    );
    let tol = 1e-9 * (leg_length + leg_height + width);
    let classify: Classifier = Box::new(move |c, n| match axis_tag(n) {
        Some((0, false)) => "back",
        Some((0, true)) if near(c[0], leg_length, tol) => "shelf_end",
        Some((0, true)) => "leg_front",
        Some((2, true)) if near(c[2], t, tol) => "shelf_top",
        Some((2, true)) => "leg_top",
        Some((2, false)) => "bottom",
        _ => "side",
    });
    Ok(Built {
        mesh,
        classify,
        volume: leg_length * t * width + (leg_height - t) * t * width,
    })
}

fn ring_classifier() -> Classifier {
    Box::new(|c, n| {
        if n[2] > 0.9 {
            return "top";
        }
        if n[2] < -0.9 {
            return "bottom";
        }
        let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
        let radial = (n[0] * c[0] + n[1] * c[1]) / r;
        if radial < 0.0 {
            "bore"
        } else {
            "outer"
        }
    })
}

fn annular_flange(outer: f64, inner: f64, thickness: f64, d: usize) -> Result<Built> {
    if inner >= outer {
        return Err(Error::DegenerateGeometry(format!(
            "inner radius {inner} not below outer radius {outer}"
        )));
    }
    let n_theta = 12 * d;
    let (ri, ro) = (equal_area_radius(inner, n_theta), equal_area_radius(outer, n_theta));
    let mesh = ring_mesh(n_theta, d, &linspace(0.0, thickness, d), |_| (ri, ro));
    Ok(Built {
        mesh,
        classify: ring_classifier(),
        volume: PI * (outer * outer - inner * inner) * thickness,
    })
}

fn bushing(outer: f64, wall: f64, length: f64, d: usize) -> Result<Built> {
    if wall >= outer {
        return Err(Error::DegenerateGeometry(format!(
            "wall thickness {wall} closes the bore of a radius-{outer} bushing"
        )));
    }
    let inner = outer - wall;
    let n_theta = 12 * d;
    let (ri, ro) = (equal_area_radius(inner, n_theta), equal_area_radius(outer, n_theta));
    let mesh = ring_mesh(n_theta, d, &linspace(0.0, length, 2 * d), |_| (ri, ro));
    Ok(Built {
        mesh,
        classify: ring_classifier(),
        volume: PI * (outer * outer - inner * inner) * length,
    })
}

fn hex_nut(across_flats: f64, bore_diameter: f64, thickness: f64, d: usize) -> Result<Built> {
    let apothem = 0.5 * across_flats;
    let bore = 0.5 * bore_diameter;
    if bore >= 0.9 * apothem {
        return Err(Error::DegenerateGeometry(format!(
            "bore diameter {bore_diameter} leaves no wall inside {across_flats} across flats"
        )));
    }
    // multiple of 6 so hexagon corners (at multiples of 60°) are grid rays
    let n_theta = 12 * d;
    let ri = equal_area_radius(bore, n_theta);
    let hex_radius = move |theta: f64| {
        let sector = (theta / (PI / 3.0)).floor();
        let flat_normal = sector * PI / 3.0 + PI / 6.0;
        apothem / (theta - flat_normal).cos()
    };
    let mesh = ring_mesh(n_theta, d, &linspace(0.0, thickness, d), |theta| (ri, hex_radius(theta)));
    let hex_area = 2.0 * 3f64.sqrt() * apothem * apothem;
    Ok(Built {
        mesh,
        classify: ring_classifier(),
        volume: (hex_area - PI * bore * bore) * thickness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_area_polygon() {
        for n in [12, 24, 48] {
            let r = equal_area_radius(10.0, n);
            let area = 0.5 * n as f64 * r * r * (2.0 * PI / n as f64).sin();
            assert!((area - PI * 100.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hexagon_corners_on_grid() {
        let b = hex_nut(40.0, 10.0, 10.0, 1).unwrap();
        let exact = b.volume;
        assert!((b.mesh.total_volume() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn block_mesh_drops_unused_nodes() {
        let m = block_mesh(
            [Axis::new(&[0.0, 1.0, 2.0, 3.0], &[1, 1, 1]), Axis::new(&[0.0, 1.0, 2.0, 3.0], &[1, 1, 1]), Axis::new(&[0.0, 1.0], &[1])],
            |[i, j, _]| !(i == 1 && j == 1),
        );
        assert_eq!(m.elements.len(), 8);
        assert_eq!(m.nodes.len(), 32);
    }
}
