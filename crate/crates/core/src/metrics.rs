//! Scalar metrics from a solve: peak displacement magnitude, peak von Mises
//! stress, and material cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{default_epsilon, solve_static, ResultField, SimSettings};
use crate::geometry::{generate_solid, ParamVector, PartCategory};
use crate::materials::MaterialProps;

/// (u_max in mm, σ_max in MPa, cost in currency units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub u_max: f64,
    pub sigma_max: f64,
    pub cost: f64,
}

impl MetricTriple {
    pub fn u_max_um(&self) -> f64 {
        self.u_max * 1000.0
    }

    pub fn is_valid(&self) -> bool {
        [self.u_max, self.sigma_max, self.cost]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Per-constraint outcome of the three inclusive comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Feasibility {
    pub displacement_ok: bool,
    pub stress_ok: bool,
    pub cost_ok: bool,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.displacement_ok && self.stress_ok && self.cost_ok
    }

    pub fn count(&self) -> u8 {
        self.displacement_ok as u8 + self.stress_ok as u8 + self.cost_ok as u8
    }
}

/// Constraint thresholds of a task, with the stress bound already resolved
/// for a material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub delta: f64,
    pub stress_bound: f64,
    pub kappa: f64,
}

pub fn displacement_max(result: &ResultField) -> Result<f64> {
    result
        .nodal_displacements
        .iter()
        .map(|u| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt())
        .reduce(f64::max)
        .ok_or(Error::EmptyField)
}

pub fn von_mises(s: &[f64; 6]) -> f64 {
    let [sxx, syy, szz, txy, tyz, tzx] = *s;
    let d_sigma = (sxx - syy).powi(2) + (syy - szz).powi(2) + (szz - sxx).powi(2);
    let d_tau = txy * txy + tyz * tyz + tzx * tzx;
    (0.5 * d_sigma + 3.0 * d_tau).sqrt()
}

pub fn stress_max(result: &ResultField) -> Result<f64> {
    result
        .stress_tensors
        .iter()
        .map(von_mises)
        .reduce(f64::max)
        .ok_or(Error::EmptyField)
}

/// Cost = mass · unit price, with mass = density · volume in m³.
///
/// The mm³→m³ factor is applied last: the products of the table constants
/// are exact, so the result carries a single rounding.
pub fn cost(volume_mm3: f64, material: &MaterialProps) -> f64 {
    material.density * volume_mm3 * material.unit_price / 1e9
}

pub fn mass_kg(volume_mm3: f64, material: &MaterialProps) -> f64 {
    material.density * volume_mm3 / 1e9
}

pub fn check_feasibility(triple: &MetricTriple, thresholds: &Thresholds) -> Feasibility {
    Feasibility {
        displacement_ok: triple.u_max <= thresholds.delta,
        stress_ok: triple.sigma_max <= thresholds.stress_bound,
        cost_ok: triple.cost <= thresholds.kappa,
    }
}

/// Runs the whole toolchain for one design: generate, solve, extract, price.
pub fn evaluate_design(
    category: &PartCategory,
    params: &ParamVector,
    material: &MaterialProps,
    settings: &SimSettings,
    mesh_density: usize,
) -> Result<MetricTriple> {
    let solid = generate_solid(category, params, mesh_density)?;
    let field = solve_static(&solid, material, settings, default_epsilon(&solid))?;
    Ok(MetricTriple {
        u_max: displacement_max(&field)?,
        sigma_max: stress_max(&field)?,
        cost: cost(solid.volume_mm3, material),
    })
}
