//! Closed-form checks of the solver: a uniaxial bar (reproduced exactly by
//! trilinear elements) and an end-loaded cantilever against bending theory.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::fem::{solve, LoadCase, SolverOptions, SurfaceLoad};
use crate::geometry::{default_registry, generate_solid, ParamVector, SolidModel};
use crate::materials::{default_library, MaterialProps};
use crate::metrics::stress_max;

pub const BAR_TOLERANCE: f64 = 1e-6;
pub const BEAM_TOLERANCE: f64 = 0.08;
pub const BEAM_DENSITIES: [usize; 3] = [2, 4, 8];

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

impl OracleCheck {
    fn new(name: String, computed: f64, expected: f64, tolerance: f64, seconds: f64) -> Self {
        let relative_error = (computed - expected).abs() / expected.abs();
        Self {
            name,
            computed,
            expected,
            relative_error,
            tolerance,
            passed: relative_error <= tolerance,
            seconds,
        }
    }
}

fn steel() -> &'static MaterialProps {
    default_library().lookup("Carbon Steel - ASTM A105").expect("bundled material")
}

fn block(l: f64, w: f64, h: f64, density: usize) -> Result<SolidModel> {
    let plate = default_registry().get("flat_plate")?;
    generate_solid(plate, &ParamVector::new(vec![l, w, h]), density)
}

/// Mean of one displacement component over the nodes at x = `x`.
fn mean_at_x(s: &SolidModel, u: &[[f64; 3]], x: f64, axis: usize) -> f64 {
    let vals: Vec<f64> = s
        .mesh
        .nodes
        .iter()
        .zip(u)
        .filter(|(p, _)| p[0] == x)
        .map(|(_, d)| d[axis])
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Bar on symmetry supports pulled by F on its far end: σ = F/A and
/// u_tip = FL/(EA).
pub fn axial_bar(density: usize) -> Result<[OracleCheck; 2]> {
    let (l, w, t, force) = (100.0, 20.0, 10.0, 5000.0);
    let s = block(l, w, t, density)?;
    let m = steel();
    let area = w * t;
    let mut case = LoadCase::default();
    for (n, p) in s.mesh.nodes.iter().enumerate() {
        for axis in 0..3 {
            if p[axis] == 0.0 {
                case.fixed_dofs.insert(3 * n + axis);
            }
        }
    }
    let end: Vec<usize> = s.faces_with_tag("end_x1").collect();
    case.load_faces(&end, SurfaceLoad::Pressure(-force / area));
    let start = Instant::now();
    let r = solve(&s, m, &case, &SolverOptions::default())?;
    let secs = start.elapsed().as_secs_f64();
    let tip = mean_at_x(&s, &r.nodal_displacements, l, 0);
    Ok([
        OracleCheck::new(format!("axial bar σ_max, d={density}"), stress_max(&r)?, force / area, BAR_TOLERANCE, secs),
        OracleCheck::new(
            format!("axial bar tip displacement, d={density}"),
            tip,
            force * l / (m.young_modulus * area),
            BAR_TOLERANCE,
            secs,
        ),
    ])
}

/// Clamped cantilever with L/h = 10 and an end shear load: tip deflection
/// against PL³/(3EI).
pub fn cantilever(density: usize) -> Result<OracleCheck> {
    let (l, w, h, p) = (200.0, 20.0, 20.0, 1000.0);
    let s = block(l, w, h, density)?;
    let m = steel();
    let mut case = LoadCase::default();
    let root: Vec<usize> = s.faces_with_tag("end_x0").collect();
    let end: Vec<usize> = s.faces_with_tag("end_x1").collect();
    case.clamp_faces(&s, &root);
    case.load_faces(&end, SurfaceLoad::Traction([0.0, 0.0, -p / (w * h)]));
    let start = Instant::now();
    let r = solve(&s, m, &case, &SolverOptions::default())?;
    let secs = start.elapsed().as_secs_f64();
    let i = w * h.powi(3) / 12.0;
    Ok(OracleCheck::new(
        format!("cantilever tip deflection, d={density}"),
        -mean_at_x(&s, &r.nodal_displacements, l, 2),
        p * l.powi(3) / (3.0 * m.young_modulus * i),
        f64::INFINITY,
        secs,
    ))
}

/// The full suite; beam tolerance applies at the finest density and the
/// error must fall as the mesh is refined.
pub fn run_suite() -> Result<Vec<OracleCheck>> {
    let mut out: Vec<OracleCheck> = axial_bar(2)?.into();
    let mut beams = BEAM_DENSITIES.iter().map(|&d| cantilever(d)).collect::<Result<Vec<_>>>()?;
    let monotone = beams.windows(2).all(|p| p[1].relative_error < p[0].relative_error);
    if let Some(finest) = beams.last_mut() {
        finest.tolerance = BEAM_TOLERANCE;
        finest.passed = finest.relative_error <= BEAM_TOLERANCE && monotone;
    }
    for b in beams.iter_mut() {
        if b.tolerance.is_infinite() {
            b.passed = monotone;
        }
    }
    out.extend(beams);
    Ok(out)
}
