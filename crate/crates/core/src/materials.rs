//! Material library.
//!
//! Units: Young's modulus and allowable stress in MPa, density in kg/m³,
//! unit price in currency-units per kg. The library file is a JSON array of
//! records with the fields `name`, `E_mpa`, `nu`, `rho_kg_m3`,
//! `price_per_kg`, `sigma_allow_mpa`, kept in declaration order.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_LIBRARY: &str = include_str!("../data/materials.json");

/// Isotropic linear-elastic material with the cost and strength data needed
/// by the constraint checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    pub name: String,
    #[serde(rename = "E_mpa")]
    pub young_modulus: f64,
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    #[serde(rename = "rho_kg_m3")]
    pub density: f64,
    #[serde(rename = "price_per_kg")]
    pub unit_price: f64,
    #[serde(rename = "sigma_allow_mpa")]
    pub allowable_stress: f64,
}

impl MaterialProps {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidMaterial(format!("{}: {what}", self.name)));
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return bad("Young's modulus must be positive");
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad("Poisson's ratio must lie in (0, 0.5)");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be positive");
        }
        if !(self.unit_price >= 0.0 && self.unit_price.is_finite()) {
            return bad("unit price must be non-negative");
        }
        if !(self.allowable_stress > 0.0 && self.allowable_stress.is_finite()) {
            return bad("allowable stress must be positive");
        }
        Ok(())
    }

    /// Lamé parameters (λ, μ).
    pub fn lame(&self) -> (f64, f64) {
        let e = self.young_modulus;
        let nu = self.poisson_ratio;
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

/// Ordered, immutable collection of materials with unique names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialLibrary {
    materials: Vec<MaterialProps>,
}

impl MaterialLibrary {
    pub fn new(materials: Vec<MaterialProps>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &materials {
            m.validate()?;
            if !seen.insert(m.name.as_str()) {
                return Err(Error::InvalidMaterial(format!("duplicate name `{}`", m.name)));
            }
        }
        Ok(Self { materials })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.materials).expect("materials serialize")
    }

    pub fn lookup(&self, name: &str) -> Result<&MaterialProps> {
        self.materials
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    /// Names in declaration order.
    pub fn list_materials(&self) -> Vec<&str> {
        self.materials.iter().map(|m| m.name.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MaterialProps> {
        self.materials.iter()
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn cheapest(&self) -> Option<&MaterialProps> {
        self.materials
            .iter()
            .min_by(|a, b| a.unit_price.total_cmp(&b.unit_price))
    }

    pub fn strongest(&self) -> Option<&MaterialProps> {
        self.materials
            .iter()
            .max_by(|a, b| a.allowable_stress.total_cmp(&b.allowable_stress))
    }
}

/// The five-material library shipped with the crate.
pub fn default_library() -> &'static MaterialLibrary {
    use std::sync::OnceLock;
    static LIB: OnceLock<MaterialLibrary> = OnceLock::new();
    LIB.get_or_init(|| MaterialLibrary::from_json(DEFAULT_LIBRARY).expect("bundled library is valid"))
}
