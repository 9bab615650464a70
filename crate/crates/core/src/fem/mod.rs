//! Linear static analysis of a meshed solid.
//!
//! Units are mm, N and MPa throughout. Boundary conditions are attached by
//! matching anchor points to boundary faces: faces matched by fixed-role
//! anchors have every translational dof clamped, faces matched by the load
//! anchor carry a uniform pressure. Positive pressure pushes along the inward
//! normal.

mod assembly;
pub mod resultfile;
mod solver;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

pub use assembly::{assemble_stiffness, element_stiffness, gauss_point_stresses, CsrMatrix};
pub use solver::{iteration_cap, pcg, CgOutcome, SolverOptions};

use crate::error::{Error, Result};
use crate::geometry::{norm, point_quad_distance, AnchorRole, SolidModel, Vec3};
use crate::materials::MaterialProps;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub pressure_mpa: f64,
    pub fixed_roles: BTreeSet<AnchorRole>,
}

impl SimSettings {
    pub fn pressure(pressure_mpa: f64) -> Self {
        Self {
            pressure_mpa,
            fixed_roles: BTreeSet::from([AnchorRole::Fixed]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pressure_mpa.is_finite() {
            return Err(Error::Format(format!("pressure {} is not finite", self.pressure_mpa)));
        }
        if self.fixed_roles.is_empty() {
            return Err(Error::SingularSystem("no fixed roles configured".into()));
        }
        Ok(())
    }
}

/// Nodal displacements and Gauss-point stresses from one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultField {
    pub nodal_displacements: Vec<Vec3>,
    /// (σxx, σyy, σzz, τxy, τyz, τzx) per Gauss point, element-major.
    pub stress_tensors: Vec<[f64; 6]>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub solver_log: String,
}

/// Tolerance used when none is given: 1e-6 of the bounding-box diagonal.
pub fn default_epsilon(solid: &SolidModel) -> f64 {
    1e-6 * solid.mesh.bounding_diagonal()
}

/// Boundary faces within `epsilon` of an anchor with `role`, grown to every
/// edge-connected face of the same template face. Sorted face indices.
pub fn match_faces(solid: &SolidModel, role: AnchorRole, epsilon: f64) -> Result<Vec<usize>> {
    let anchors: Vec<Vec3> = solid
        .anchors
        .iter()
        .filter(|a| a.role == role)
        .map(|a| a.position)
        .collect();
    if anchors.is_empty() {
        return Err(Error::NoFaceMatched(role.as_str().into()));
    }
    let seeds: Vec<usize> = (0..solid.boundary_faces.len())
        .filter(|&f| {
            let p = solid.face_points(f);
            anchors.iter().any(|&q| point_quad_distance(q, &p) <= epsilon)
        })
        .collect();
    if seeds.is_empty() {
        return Err(Error::NoFaceMatched(role.as_str().into()));
    }

    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, face) in solid.boundary_faces.iter().enumerate() {
        for k in 0..4 {
            let (a, b) = (face.nodes[k], face.nodes[(k + 1) % 4]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let mut selected = BTreeSet::new();
    let mut queue: VecDeque<usize> = seeds.into_iter().collect();
    while let Some(f) = queue.pop_front() {
        if !selected.insert(f) {
            continue;
        }
        let face = &solid.boundary_faces[f];
        for k in 0..4 {
            let (a, b) = (face.nodes[k], face.nodes[(k + 1) % 4]);
            for &g in &edge_faces[&(a.min(b), a.max(b))] {
                if !selected.contains(&g) && solid.boundary_faces[g].tag == face.tag {
                    queue.push_back(g);
                }
            }
        }
    }
    Ok(selected.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceLoad {
    /// Uniform pressure (MPa) acting along the inward normal.
    Pressure(f64),
    /// Uniform traction vector (MPa) per unit area.
    Traction(Vec3),
}

/// Explicit boundary value problem: clamped dofs plus loaded faces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadCase {
    /// Constrained global dofs (3·node + axis).
    pub fixed_dofs: BTreeSet<usize>,
    pub surface_loads: Vec<(usize, SurfaceLoad)>,
}

impl LoadCase {
    pub fn clamp_faces(&mut self, solid: &SolidModel, faces: &[usize]) {
        for &f in faces {
            for &n in &solid.boundary_faces[f].nodes {
                self.fixed_dofs.extend([3 * n, 3 * n + 1, 3 * n + 2]);
            }
        }
    }

    pub fn load_faces(&mut self, faces: &[usize], load: SurfaceLoad) {
        self.surface_loads.extend(faces.iter().map(|&f| (f, load)));
    }
}

/// Consistent nodal force vector for the surface loads (2×2 face quadrature).
pub fn load_vector(solid: &SolidModel, case: &LoadCase) -> Vec<f64> {
    const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut f = vec![0.0; 3 * solid.mesh.nodes.len()];
    let g = crate::geometry::GAUSS_1D;
    for &(face, load) in &case.surface_loads {
        let p = solid.face_points(face);
        let nodes = solid.boundary_faces[face].nodes;
        for &t in &g {
            for &s in &g {
                let mut xs = [0.0; 3];
                let mut xt = [0.0; 3];
                let mut n = [0.0; 4];
                for a in 0..4 {
                    let [ca, cb] = CORNERS[a];
                    n[a] = 0.25 * (1.0 + ca * s) * (1.0 + cb * t);
                    let dns = 0.25 * ca * (1.0 + cb * t);
                    let dnt = 0.25 * cb * (1.0 + ca * s);
                    for i in 0..3 {
                        xs[i] += dns * p[a][i];
                        xt[i] += dnt * p[a][i];
                    }
                }
                let area_vec = crate::geometry::cross(xs, xt);
                let force = match load {
                    SurfaceLoad::Pressure(pr) => area_vec.map(|c| -pr * c),
                    SurfaceLoad::Traction(tr) => {
                        let da = norm(area_vec);
                        tr.map(|c| c * da)
                    }
                };
                for a in 0..4 {
                    for i in 0..3 {
                        f[3 * nodes[a] + i] += n[a] * force[i];
                    }
                }
            }
        }
    }
    f
}

/// Solves an explicit load case.
pub fn solve(solid: &SolidModel, material: &MaterialProps, case: &LoadCase, opts: &SolverOptions) -> Result<ResultField> {
    if case.fixed_dofs.is_empty() {
        return Err(Error::SingularSystem("no constrained degrees of freedom".into()));
    }
    let k = assemble_stiffness(&solid.mesh, material)?;
    let f = load_vector(solid, case);
    let mut fixed = vec![false; k.n];
    for &d in &case.fixed_dofs {
        fixed[d] = true;
    }
    let free = fixed.iter().filter(|x| !**x).count();
    let out = pcg(&k, &f, &fixed, opts);
    let mut log = format!(
        "linear static: {} nodes, {} elements, {} free dofs, {} constrained\n\
         material {} (E={} MPa, nu={})\n\
         pcg: iterations={} cap={} relative_residual={:e} tol={:e}\n",
        solid.mesh.nodes.len(),
        solid.mesh.elements.len(),
        free,
        k.n - free,
        material.name,
        material.young_modulus,
        material.poisson_ratio,
        out.iterations,
        out.cap,
        out.relative_residual,
        opts.rel_tol
    );
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            residual: out.relative_residual,
        });
    }
    log.push_str("status: converged\n");
    let stress_tensors = gauss_point_stresses(&solid.mesh, material, &out.x);
    let nodal_displacements = out.x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(ResultField {
        nodal_displacements,
        stress_tensors,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        converged: true,
        solver_log: log,
    })
}

/// Builds the load case implied by the solid's anchors and `settings`.
pub fn load_case(solid: &SolidModel, settings: &SimSettings, epsilon: f64) -> Result<LoadCase> {
    settings.validate()?;
    let mut case = LoadCase::default();
    for &role in &settings.fixed_roles {
        let faces = match_faces(solid, role, epsilon)
            .map_err(|e| Error::SingularSystem(format!("support faces not found: {e}")))?;
        case.clamp_faces(solid, &faces);
    }
    let loaded = match_faces(solid, AnchorRole::Load, epsilon)?;
    case.load_faces(&loaded, SurfaceLoad::Pressure(settings.pressure_mpa));
    Ok(case)
}

/// Uniform pressure on the load faces, anchor-matched faces clamped.
pub fn solve_static(
    solid: &SolidModel,
    material: &MaterialProps,
    settings: &SimSettings,
    epsilon: f64,
) -> Result<ResultField> {
    solve_static_with(solid, material, settings, epsilon, &SolverOptions::default())
}

pub fn solve_static_with(
    solid: &SolidModel,
    material: &MaterialProps,
    settings: &SimSettings,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<ResultField> {
    let case = load_case(solid, settings, epsilon)?;
    solve(solid, material, &case, opts)
}

/// Reaction forces K·u − f at every dof (non-zero only where constrained,
/// up to solver tolerance).
pub fn reactions(k: &CsrMatrix, u: &[Vec3], f: &[f64]) -> Vec<f64> {
    let flat: Vec<f64> = u.iter().flat_map(|v| v.iter().copied()).collect();
    let mut ku = vec![0.0; k.n];
    k.mul_vec(&flat, &mut ku);
    ku.iter().zip(f).map(|(a, b)| a - b).collect()
}
