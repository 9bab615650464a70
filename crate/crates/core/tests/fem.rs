use std::collections::BTreeSet;
use std::time::Instant;

use cadloop::fem::{
    assemble_stiffness, default_epsilon, load_vector, match_faces, reactions, solve, solve_static,
    solve_static_with, LoadCase, SimSettings, SolverOptions, SurfaceLoad,
};
use cadloop::geometry::{default_registry, generate_solid, AnchorRole, ParamVector, SolidModel};
use cadloop::materials::default_library;
use cadloop::metrics::{displacement_max, stress_max};
use cadloop::Error;

fn a105() -> &'static cadloop::materials::MaterialProps {
    default_library().lookup("Carbon Steel - ASTM A105").unwrap()
}

fn plate(p: [f64; 3], d: usize) -> SolidModel {
    generate_solid(
        default_registry().get("flat_plate").unwrap(),
        &ParamVector::new(p.to_vec()),
        d,
    )
    .unwrap()
}

/// Faces of the solid whose tag matches.
fn tagged(s: &SolidModel, tag: &str) -> Vec<usize> {
    s.faces_with_tag(tag).collect()
}

/// Symmetry-plane supports (x=0, y=0, z=0 normal components) and pull on
/// the far end: a pure uniaxial stress state the trilinear element must
/// reproduce exactly.
fn axial_bar_case(s: &SolidModel, stress: f64) -> LoadCase {
    let mut case = LoadCase::default();
    for (n, p) in s.mesh.nodes.iter().enumerate() {
        for axis in 0..3 {
            if p[axis] == 0.0 {
                case.fixed_dofs.insert(3 * n + axis);
            }
        }
    }
    case.load_faces(&tagged(s, "end_x1"), SurfaceLoad::Pressure(-stress));
    case
}

#[test]
fn axial_bar_patch_test() {
    let (l, w, t) = (100.0, 20.0, 10.0);
    let s = plate([l, w, t], 2);
    let m = a105();
    let force = 5000.0;
    let area = w * t;
    let sigma = force / area;
    let start = Instant::now();
    let r = solve(&s, m, &axial_bar_case(&s, sigma), &SolverOptions::default()).unwrap();
    let elapsed = start.elapsed();

    let tip_expected = force * l / (m.young_modulus * area);
    let tip = s
        .mesh
        .nodes
        .iter()
        .zip(&r.nodal_displacements)
        .filter(|(p, _)| p[0] == l)
        .map(|(_, u)| u[0])
        .collect::<Vec<_>>();
    for u in tip {
        assert!(((u - tip_expected) / tip_expected).abs() <= 1e-6, "tip {u} vs {tip_expected}");
    }
    for st in &r.stress_tensors {
        assert!(((st[0] - sigma) / sigma).abs() <= 1e-6);
        for c in &st[1..] {
            assert!(c.abs() <= 1e-6 * sigma);
        }
    }
    let smax = stress_max(&r).unwrap();
    assert!(((smax - sigma) / sigma).abs() <= 1e-6);
    assert!(elapsed.as_secs_f64() < 1.0);
}

fn cantilever_tip_error(d: usize) -> (f64, f64, f64) {
    // L/h = 10, square section; end shear traction.
    let (l, w, h) = (200.0, 20.0, 20.0);
    let s = plate([l, w, h], d);
    let m = a105();
    let p_total = 1000.0;
    let mut case = LoadCase::default();
    case.clamp_faces(&s, &tagged(&s, "end_x0"));
    case.load_faces(&tagged(&s, "end_x1"), SurfaceLoad::Traction([0.0, 0.0, -p_total / (w * h)]));
    let r = solve(&s, m, &case, &SolverOptions::default()).unwrap();
    let i = w * h.powi(3) / 12.0;
    let oracle = p_total * l.powi(3) / (3.0 * m.young_modulus * i);
    // mean vertical deflection over the loaded end
    let tip: Vec<f64> = s
        .mesh
        .nodes
        .iter()
        .zip(&r.nodal_displacements)
        .filter(|(p, _)| p[0] == l)
        .map(|(_, u)| -u[2])
        .collect();
    let mean = tip.iter().sum::<f64>() / tip.len() as f64;
    ((mean - oracle).abs() / oracle, mean, oracle)
}

#[test]
fn cantilever_beam_against_bending_theory() {
    let start = Instant::now();
    let errs: Vec<f64> = [2, 4, 8].iter().map(|&d| cantilever_tip_error(d).0).collect();
    let elapsed = start.elapsed();
    eprintln!("cantilever relative errors {errs:?} in {elapsed:?}");
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors not decreasing: {errs:?}");
    assert!(errs[2] <= 0.08, "density-8 error {}", errs[2]);
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
}

#[test]
fn stiffness_is_symmetric_psd_with_rigid_nullspace() {
    let s = generate_solid(
        default_registry().get("l_bracket").unwrap(),
        &ParamVector::new(vec![70.0, 55.0, 25.0, 9.0]),
        1,
    )
    .unwrap();
    let k = assemble_stiffness(&s.mesh, a105()).unwrap();
    let kmax = k.max_abs();
    for i in 0..k.n {
        for idx in k.row_ptr[i]..k.row_ptr[i + 1] {
            let j = k.col_idx[idx];
            assert!((k.values[idx] - k.get(j, i)).abs() <= 1e-10 * kmax);
        }
    }
    // rigid-body modes: three translations, three rotations
    let mut modes = Vec::new();
    for axis in 0..3 {
        modes.push(s.mesh.nodes.iter().flat_map(|_| {
            let mut v = [0.0; 3];
            v[axis] = 1.0;
            v
        }).collect::<Vec<f64>>());
    }
    for axis in 0..3 {
        let w = {
            let mut w = [0.0; 3];
            w[axis] = 1.0;
            w
        };
        modes.push(
            s.mesh
                .nodes
                .iter()
                .flat_map(|p| [w[1] * p[2] - w[2] * p[1], w[2] * p[0] - w[0] * p[2], w[0] * p[1] - w[1] * p[0]])
                .collect(),
        );
    }
    let frob = k.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut kr = vec![0.0; k.n];
    for r in &modes {
        k.mul_vec(r, &mut kr);
        let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nkr = kr.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(nkr <= 1e-8 * frob * nr, "rigid mode residual {nkr}");
    }
    // uᵀKu ≥ 0 on pseudo-random vectors
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for _ in 0..20 {
        let u: Vec<f64> = (0..k.n).map(|_| next()).collect();
        k.mul_vec(&u, &mut kr);
        let e: f64 = u.iter().zip(&kr).map(|(a, b)| a * b).sum();
        assert!(e > 0.0);
    }
}

#[test]
fn reactions_balance_applied_pressure() {
    for (id, p) in [
        ("flat_plate", vec![120.0, 60.0, 6.0]),
        ("annular_flange", vec![60.0, 20.0, 8.0]),
        ("solid_cylinder_bushing", vec![30.0, 8.0, 50.0]),
    ] {
        let s = generate_solid(default_registry().get(id).unwrap(), &ParamVector::new(p), 1).unwrap();
        let settings = SimSettings::pressure(2.0);
        let m = a105();
        let eps = default_epsilon(&s);
        let r = solve_static(&s, m, &settings, eps).unwrap();
        let case = cadloop::fem::load_case(&s, &settings, eps).unwrap();
        let f = load_vector(&s, &case);
        let k = assemble_stiffness(&s.mesh, m).unwrap();
        let reac = reactions(&k, &r.nodal_displacements, &f);
        let mut applied = [0.0; 3];
        let mut react = [0.0; 3];
        for dof in 0..k.n {
            applied[dof % 3] += f[dof];
            if case.fixed_dofs.contains(&dof) {
                react[dof % 3] += reac[dof];
            }
        }
        // gross load magnitude: closed surfaces have near-zero net force
        let gross: f64 = case
            .surface_loads
            .iter()
            .map(|&(face, _)| 2.0 * cadloop::geometry::norm(cadloop::geometry::quad_area_vector(&s.face_points(face))))
            .sum();
        let denom = applied.iter().map(|v| v.abs()).fold(gross, f64::max);
        for i in 0..3 {
            assert!(
                (react[i] + applied[i]).abs() <= 1e-6 * denom,
                "{id}: axis {i} reaction {} applied {}",
                react[i],
                applied[i]
            );
        }
    }
}

#[test]
fn zero_pressure_gives_zero_field() {
    let s = plate([100.0, 50.0, 5.0], 2);
    let r = solve_static(&s, a105(), &SimSettings::pressure(0.0), default_epsilon(&s)).unwrap();
    assert!(r.nodal_displacements.iter().all(|u| *u == [0.0; 3]));
    assert!(r.stress_tensors.iter().all(|t| *t == [0.0; 6]));
    assert!(!r.stress_tensors.is_empty());
    assert_eq!(displacement_max(&r).unwrap(), 0.0);
}

#[test]
fn fixed_nodes_do_not_move() {
    let s = plate([100.0, 50.0, 5.0], 2);
    let eps = default_epsilon(&s);
    let r = solve_static(&s, a105(), &SimSettings::pressure(0.5), eps).unwrap();
    let fixed = match_faces(&s, AnchorRole::Fixed, eps).unwrap();
    for f in fixed {
        for n in s.boundary_faces[f].nodes {
            assert_eq!(r.nodal_displacements[n], [0.0; 3]);
        }
    }
    assert!(displacement_max(&r).unwrap() > 0.0);
}

#[test]
fn match_faces_selects_whole_template_face() {
    let s = plate([100.0, 50.0, 5.0], 2);
    let eps = default_epsilon(&s);
    let fixed = match_faces(&s, AnchorRole::Fixed, eps).unwrap();
    // oracle: enumerate boundary faces lying in the x = 0 plane
    let expected: Vec<usize> = (0..s.boundary_faces.len())
        .filter(|&f| s.face_points(f).iter().all(|p| p[0].abs() <= eps))
        .collect();
    assert_eq!(fixed, expected);
    assert_eq!(fixed.len(), 2 * 2 * 2);

    // anchors pushed well off the surface match nothing
    let mut off = s.clone();
    for a in &mut off.anchors {
        if a.role == AnchorRole::Fixed {
            a.position = [-10.0 * eps, 25.0, 2.5];
        }
    }
    assert!(matches!(match_faces(&off, AnchorRole::Fixed, eps), Err(Error::NoFaceMatched(_))));
    assert!(matches!(
        solve_static(&off, a105(), &SimSettings::pressure(1.0), eps),
        Err(Error::SingularSystem(_))
    ));
}

#[test]
fn anchors_select_same_template_faces_across_parameters() {
    let reg = default_registry();
    for c in reg.categories() {
        let pick = |frac: f64| -> Vec<f64> {
            c.params
                .iter()
                .map(|p| {
                    if p.name == "inner_radius" || p.name == "bore_diameter" {
                        p.lower
                    } else if p.name == "wall_thickness" {
                        p.lower + frac * 0.2 * (p.upper - p.lower)
                    } else {
                        p.lower + frac * (p.upper - p.lower)
                    }
                })
                .collect()
        };
        let tags = |s: &SolidModel, role| -> BTreeSet<String> {
            match_faces(s, role, default_epsilon(s))
                .unwrap()
                .into_iter()
                .map(|f| s.boundary_faces[f].tag.clone())
                .collect()
        };
        let a = generate_solid(c, &ParamVector::new(pick(0.3)), 1).unwrap();
        let b = generate_solid(c, &ParamVector::new(pick(0.8)), 1).unwrap();
        for rule in &c.anchors {
            let ta = tags(&a, rule.role);
            assert_eq!(ta, tags(&b, rule.role), "{}", c.id);
            assert_eq!(ta, BTreeSet::from([rule.face.clone()]), "{}", c.id);
            // whole template face selected
            let n: usize = a.faces_with_tag(&rule.face).count();
            assert_eq!(match_faces(&a, rule.role, default_epsilon(&a)).unwrap().len(), n, "{}", c.id);
        }
    }
}

#[test]
fn tight_iteration_cap_reports_non_convergence() {
    let s = plate([150.0, 40.0, 4.0], 2);
    let err = solve_static_with(
        &s,
        a105(),
        &SimSettings::pressure(1.0),
        default_epsilon(&s),
        &SolverOptions {
            rel_tol: 1e-8,
            max_iterations: Some(5),
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::NonConvergence { iterations: 5, .. }));
}

#[test]
fn thicker_plate_deflects_less() {
    let m = a105();
    let u = |t: f64| {
        let s = plate([100.0, 50.0, t], 2);
        displacement_max(&solve_static(&s, m, &SimSettings::pressure(0.2), default_epsilon(&s)).unwrap()).unwrap()
    };
    let (u4, u8) = (u(4.0), u(8.0));
    assert!(u8 < u4);
    // cubic in thickness for thin-plate theory; coarse trilinear meshes lock
    // toward a weaker dependence
    let ratio = u4 / u8;
    assert!(ratio > 2.0 && ratio < 10.0, "ratio {ratio}");
}
