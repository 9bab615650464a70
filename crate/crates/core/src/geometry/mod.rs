//! Parametric part templates.
//!
//! A [`PartCategory`] names a template and its parameter schema; generating
//! a solid produces a structured hexahedral mesh, its tagged boundary faces,
//! the anchor points used to place loads and supports, and the analytic
//! volume. All lengths are millimetres.

mod mesh;
pub mod meshfile;
mod templates;

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use mesh::{
    gauss_points, point_quad_distance, quad_area_vector, quad_centroid, shape_derivatives,
    shape_functions, Mesh, Vec3, GAUSS_1D, HEX_FACES,
};
pub use mesh::norm;
pub(crate) use mesh::{cross, det3, inv3, jacobian};

use crate::error::{Error, Result};

const DEFAULT_REGISTRY: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRole {
    Fixed,
    Load,
}

impl AnchorRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorRole::Fixed => "fixed",
            AnchorRole::Load => "load",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(AnchorRole::Fixed),
            "load" => Some(AnchorRole::Load),
            _ => None,
        }
    }
}

/// How a parameter affects the part, used by rule-based policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamTag {
    /// Raising it stiffens the part (thicknesses, section heights).
    Stiffness,
    /// Overall size; shrinking it saves material.
    Bulk,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub unit: String,
    pub tag: ParamTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRule {
    pub role: AnchorRole,
    /// Symbolic face tag the anchor sits on.
    pub face: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Main,
    HeldOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartCategory {
    pub id: String,
    pub split: Split,
    pub params: Vec<ParamSpec>,
    pub anchors: Vec<AnchorRule>,
    #[serde(default)]
    pub description: String,
}

impl PartCategory {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ParamCount {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        for (spec, &value) in self.params.iter().zip(params.values()) {
            if !(value >= spec.lower && value <= spec.upper) {
                return Err(Error::ParamOutOfBounds {
                    name: spec.name.clone(),
                    value,
                    lower: spec.lower,
                    upper: spec.upper,
                });
            }
        }
        Ok(())
    }

    /// Builds a vector from a name→value map; every schema name must be present.
    pub fn params_from_map(&self, map: &ParamMap) -> Result<ParamVector> {
        let mut values = Vec::with_capacity(self.params.len());
        for spec in &self.params {
            match map.get(&spec.name) {
                Some(&v) => values.push(v),
                None => {
                    return Err(Error::ParamCount {
                        expected: self.params.len(),
                        got: map.len(),
                    })
                }
            }
        }
        if map.len() != self.params.len() {
            return Err(Error::ParamCount {
                expected: self.params.len(),
                got: map.len(),
            });
        }
        Ok(ParamVector::new(values))
    }

    pub fn params_to_map(&self, params: &ParamVector) -> ParamMap {
        self.params
            .iter()
            .zip(params.values())
            .map(|(s, &v)| (s.name.clone(), v))
            .collect()
    }

    /// Clamps every value into its bounds.
    pub fn clamp(&self, params: &ParamVector) -> ParamVector {
        ParamVector::new(
            self.params
                .iter()
                .zip(params.values())
                .map(|(s, &v)| v.clamp(s.lower, s.upper))
                .collect(),
        )
    }
}

/// Named parameter values; insertion order is kept so serialized maps follow
/// the schema.
pub type ParamMap = IndexMap<String, f64>;

/// Ordered geometric parameters, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    categories: Vec<PartCategory>,
}

impl TemplateRegistry {
    pub fn new(categories: Vec<PartCategory>) -> Result<Self> {
        for c in &categories {
            if !templates::has_builder(&c.id) {
                return Err(Error::UnknownCategory(c.id.clone()));
            }
            for p in &c.params {
                if !(p.lower < p.upper) {
                    return Err(Error::Format(format!("{}: bounds of `{}` not ordered", c.id, p.name)));
                }
            }
            let has = |r| c.anchors.iter().any(|a| a.role == r);
            if !has(AnchorRole::Fixed) || !has(AnchorRole::Load) {
                return Err(Error::Format(format!("{}: needs a fixed and a load anchor", c.id)));
            }
        }
        Ok(Self { categories })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, id: &str) -> Result<&PartCategory> {
        self.categories
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownCategory(id.to_string()))
    }

    pub fn param_schema(&self, id: &str) -> Result<&[ParamSpec]> {
        Ok(&self.get(id)?.params)
    }

    pub fn categories(&self) -> &[PartCategory] {
        &self.categories
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &PartCategory> {
        self.categories.iter().filter(move |c| c.split == split)
    }
}

pub fn default_registry() -> &'static TemplateRegistry {
    use std::sync::OnceLock;
    static REG: OnceLock<TemplateRegistry> = OnceLock::new();
    REG.get_or_init(|| TemplateRegistry::from_json(DEFAULT_REGISTRY).expect("bundled registry is valid"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub position: Vec3,
    pub role: AnchorRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    /// Corner node ids; right-hand order gives the outward normal.
    pub nodes: [usize; 4],
    pub element: usize,
    /// Unit outward normal.
    pub normal: Vec3,
    /// Template face the quad belongs to.
    pub tag: String,
}

/// Meshed parametric solid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidModel {
    pub category_id: String,
    pub params: ParamVector,
    pub mesh: Mesh,
    pub boundary_faces: Vec<BoundaryFace>,
    pub anchors: Vec<AnchorPoint>,
    pub volume_mm3: f64,
}

impl SolidModel {
    pub fn face_points(&self, f: usize) -> [Vec3; 4] {
        self.boundary_faces[f].nodes.map(|n| self.mesh.nodes[n])
    }

    pub fn faces_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.boundary_faces
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.tag == tag)
            .map(|(i, _)| i)
    }
}

pub fn param_schema<'a>(registry: &'a TemplateRegistry, category: &str) -> Result<&'a [ParamSpec]> {
    registry.param_schema(category)
}

/// Builds the meshed solid for `params`; deterministic for fixed inputs.
pub fn generate_solid(category: &PartCategory, params: &ParamVector, mesh_density: usize) -> Result<SolidModel> {
    if mesh_density == 0 {
        return Err(Error::MeshingFailure("mesh density must be positive".into()));
    }
    category.check_params(params)?;
    let built = templates::build(&category.id, params.values(), mesh_density)?;
    let mesh = built.mesh;

    let diag = mesh.bounding_diagonal();
    let det_floor = 1e-12 * diag.powi(3);
    for e in 0..mesh.elements.len() {
        let j = mesh.min_jacobian(e);
        if !(j > det_floor) {
            return Err(Error::MeshingFailure(format!("element {e} has Jacobian determinant {j:e}")));
        }
    }

    let boundary_faces: Vec<BoundaryFace> = mesh
        .exterior_faces()
        .into_iter()
        .map(|(element, nodes)| {
            let p = nodes.map(|n| mesh.nodes[n]);
            let area = quad_area_vector(&p);
            let normal = mesh::scale(area, 1.0 / norm(area));
            let tag = (built.classify)(quad_centroid(&p), normal).to_string();
            BoundaryFace {
                nodes,
                element,
                normal,
                tag,
            }
        })
        .collect();

    let mut solid = SolidModel {
        category_id: category.id.clone(),
        params: params.clone(),
        mesh,
        boundary_faces,
        anchors: Vec::new(),
        volume_mm3: built.volume,
    };
    for rule in &category.anchors {
        let position = anchor_position(&solid, &rule.face)?;
        solid.anchors.push(AnchorPoint {
            position,
            role: rule.role,
        });
    }
    Ok(solid)
}

pub fn solid_volume(solid: &SolidModel) -> f64 {
    solid.volume_mm3
}

/// Area centroid of the tagged face set when it lies on the set and clear of
/// every other face; otherwise the centre of the tagged quad nearest to it.
fn anchor_position(solid: &SolidModel, tag: &str) -> Result<Vec3> {
    let faces: Vec<usize> = solid.faces_with_tag(tag).collect();
    if faces.is_empty() {
        return Err(Error::MeshingFailure(format!("template face `{tag}` produced no boundary quads")));
    }
    let mut total = 0.0;
    let mut acc = [0.0; 3];
    for &f in &faces {
        let p = solid.face_points(f);
        let a = norm(quad_area_vector(&p));
        total += a;
        acc = mesh::add(acc, mesh::scale(quad_centroid(&p), a));
    }
    let centroid = mesh::scale(acc, 1.0 / total);
    let diag = solid.mesh.bounding_diagonal();
    let on_face = faces
        .iter()
        .map(|&f| point_quad_distance(centroid, &solid.face_points(f)))
        .fold(f64::INFINITY, f64::min);
    let clear_of_others = (0..solid.boundary_faces.len())
        .filter(|&f| solid.boundary_faces[f].tag != tag)
        .map(|f| point_quad_distance(centroid, &solid.face_points(f)))
        .fold(f64::INFINITY, f64::min);
    if on_face <= 1e-12 * diag && clear_of_others > 1e-3 * diag {
        return Ok(centroid);
    }
    let mut best = (f64::INFINITY, [0.0; 3]);
    for &f in &faces {
        let c = quad_centroid(&solid.face_points(f));
        let d = norm(mesh::sub(c, centroid));
        if d < best.0 {
            best = (d, c);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> &'static TemplateRegistry {
        default_registry()
    }

    fn solid(id: &str, p: &[f64], d: usize) -> Result<SolidModel> {
        generate_solid(reg().get(id)?, &ParamVector::new(p.to_vec()), d)
    }

    #[test]
    fn schemas() {
        let names = |id| reg().param_schema(id).unwrap().iter().map(|p| p.name.clone()).collect::<Vec<_>>();
        assert_eq!(names("cantilever_box_beam"), ["length", "width", "height", "wall_thickness"]);
        assert_eq!(names("flat_plate"), ["length", "width", "thickness"]);
        assert!(reg()
            .param_schema("cantilever_box_beam")
            .unwrap()
            .iter()
            .all(|p| p.unit == "mm" && p.lower < p.upper));
        assert!(matches!(reg().param_schema("gear"), Err(Error::UnknownCategory(_))));
        assert!(reg().categories().len() >= 6);
        assert_eq!(reg().split(Split::HeldOut).count(), 1);
        assert_eq!(reg().split(Split::Main).count(), 5);
    }

    #[test]
    fn flat_plate_volume_and_bounds() {
        let s = solid("flat_plate", &[100.0, 50.0, 5.0], 2).unwrap();
        assert_eq!(s.volume_mm3, 25000.0);
        assert_eq!(solid_volume(&s), 25000.0);
        assert!((s.mesh.total_volume() - 25000.0).abs() < 1e-8);
        assert!(matches!(
            solid("flat_plate", &[100.0, 50.0, -1.0], 2),
            Err(Error::ParamOutOfBounds { name, .. }) if name == "thickness"
        ));
        assert!(matches!(solid("flat_plate", &[100.0, 50.0], 2), Err(Error::ParamCount { .. })));
    }

    #[test]
    fn degenerate_box_beam() {
        assert!(matches!(
            solid("cantilever_box_beam", &[200.0, 60.0, 30.0, 15.0], 2),
            Err(Error::DegenerateGeometry(_))
        ));
        let ok = solid("cantilever_box_beam", &[200.0, 60.0, 40.0, 5.0], 2).unwrap();
        let expected = 200.0 * (60.0 * 40.0 - 50.0 * 30.0);
        assert_eq!(ok.volume_mm3, expected);
        assert!((ok.mesh.total_volume() - expected).abs() < 1e-7 * expected);
    }

    #[test]
    fn annular_flange_volume() {
        let s = solid("annular_flange", &[40.0, 20.0, 10.0], 2).unwrap();
        let exact = std::f64::consts::PI * (40.0f64.powi(2) - 20.0f64.powi(2)) * 10.0;
        assert_eq!(s.volume_mm3, exact);
        assert!((exact - 37699.1).abs() < 0.05);
        assert!((s.mesh.total_volume() - exact).abs() <= 0.005 * exact);
    }

    #[test]
    fn l_bracket_is_two_boxes() {
        let (a, b, w, t) = (80.0, 60.0, 30.0, 8.0);
        let s = solid("l_bracket", &[a, b, w, t], 2).unwrap();
        let expected = a * t * w + (b - t) * t * w;
        assert!((s.volume_mm3 - expected).abs() < 1e-9);
        assert!((s.mesh.total_volume() - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn every_template_meshes_at_midpoint() {
        for c in reg().categories() {
            let mid: Vec<f64> = c.params.iter().map(|p| 0.5 * (p.lower + p.upper)).collect();
            // midpoint of independent bounds can still be degenerate for
            // hollow templates; nudge free radii down
            let mut p = mid;
            if let Some(i) = c.param_index("inner_radius").or(c.param_index("bore_diameter")) {
                p[i] = c.params[i].lower;
            }
            let s = generate_solid(c, &ParamVector::new(p), 1).unwrap_or_else(|e| panic!("{}: {e}", c.id));
            let rel = (s.mesh.total_volume() - s.volume_mm3).abs() / s.volume_mm3;
            assert!(rel <= 0.005, "{}: meshed volume off by {rel}", c.id);
            for a in &s.anchors {
                let d = s
                    .boundary_faces
                    .iter()
                    .enumerate()
                    .map(|(f, _)| point_quad_distance(a.position, &s.face_points(f)))
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-9 * s.mesh.bounding_diagonal(), "{}: anchor off surface by {d}", c.id);
            }
        }
    }

    #[test]
    fn flat_plate_volume_is_monotone_in_each_parameter() {
        let base = [100.0, 50.0, 5.0];
        let v0 = solid("flat_plate", &base, 1).unwrap().volume_mm3;
        for i in 0..3 {
            let mut p = base;
            p[i] *= 1.1;
            assert!(solid("flat_plate", &p, 1).unwrap().volume_mm3 > v0);
        }
    }

    #[test]
    fn zero_density_rejected() {
        assert!(matches!(solid("flat_plate", &[100.0, 50.0, 5.0], 0), Err(Error::MeshingFailure(_))));
    }
}
