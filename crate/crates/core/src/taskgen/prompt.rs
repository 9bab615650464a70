//! Four-part task prompts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PartCategory;
use crate::materials::MaterialLibrary;

use super::TaskInstance;

const VARIANT_SEPARATOR: &str = "\n%%\n";

const PART1: &str = include_str!("../../prompts/part1.txt");
const PART3: &str = include_str!("../../prompts/part3.txt");

const PART2: [(&str, &str); 6] = [
    ("flat_plate", include_str!("../../prompts/part2/flat_plate.txt")),
    ("cantilever_box_beam", include_str!("../../prompts/part2/cantilever_box_beam.txt")),
    ("l_bracket", include_str!("../../prompts/part2/l_bracket.txt")),
    ("annular_flange", include_str!("../../prompts/part2/annular_flange.txt")),
    ("solid_cylinder_bushing", include_str!("../../prompts/part2/solid_cylinder_bushing.txt")),
    ("hex_prism_nut_blank", include_str!("../../prompts/part2/hex_prism_nut_blank.txt")),
];

const PART4: [(&str, &str); 6] = [
    ("flat_plate", include_str!("../../prompts/part4/flat_plate.txt")),
    ("cantilever_box_beam", include_str!("../../prompts/part4/cantilever_box_beam.txt")),
    ("l_bracket", include_str!("../../prompts/part4/l_bracket.txt")),
    ("annular_flange", include_str!("../../prompts/part4/annular_flange.txt")),
    ("solid_cylinder_bushing", include_str!("../../prompts/part4/solid_cylinder_bushing.txt")),
    ("hex_prism_nut_blank", include_str!("../../prompts/part4/hex_prism_nut_blank.txt")),
];

/// Template text for every prompt part.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub part1: Vec<String>,
    pub part2: BTreeMap<String, String>,
    pub part3: Vec<String>,
    pub part4: BTreeMap<String, String>,
}

fn split_variants(text: &str) -> Vec<String> {
    text.split(VARIANT_SEPARATOR)
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect()
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        let table = |parts: &[(&str, &str)]| {
            parts
                .iter()
                .map(|(id, text)| (id.to_string(), text.trim().to_string()))
                .collect()
        };
        Self {
            part1: split_variants(PART1),
            part2: table(&PART2),
            part3: split_variants(PART3),
            part4: table(&PART4),
        }
    }

    /// Reads `part1.txt`, `part3.txt`, `part2/<category>.txt` and
    /// `part4/<category>.txt` under `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let per_category = |sub: &str| -> Result<BTreeMap<String, String>> {
            let mut map = BTreeMap::new();
            for entry in std::fs::read_dir(dir.join(sub))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "txt") {
                    let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    map.insert(id, std::fs::read_to_string(&path)?.trim().to_string());
                }
            }
            Ok(map)
        };
        Ok(Self {
            part1: split_variants(&std::fs::read_to_string(dir.join("part1.txt"))?),
            part2: per_category("part2")?,
            part3: split_variants(&std::fs::read_to_string(dir.join("part3.txt"))?),
            part4: per_category("part4")?,
        })
    }
}

fn fill(template: &str, values: &[(&str, String)]) -> String {
    values
        .iter()
        .fold(template.to_string(), |acc, (key, value)| acc.replace(&format!("{{{key}}}"), value))
}

fn materials_table(library: &MaterialLibrary) -> String {
    let mut out = String::from("| name | E [MPa] | nu | density [kg/m3] | price [/kg] | allowable stress [MPa] |\n|---|---|---|---|---|---|");
    for m in library.iter() {
        out.push_str(&format!(
            "\n| {} | {} | {} | {} | {} | {} |",
            m.name, m.young_modulus, m.poisson_ratio, m.density, m.unit_price, m.allowable_stress
        ));
    }
    out
}

/// Concatenates the four parts. Part 1 uses variant `variant_seed mod n`,
/// part 3 an independent permutation of the same seed.
pub fn build_prompt(
    task: &TaskInstance,
    category: &PartCategory,
    library: &MaterialLibrary,
    templates: &PromptTemplates,
    variant_seed: u64,
) -> Result<String> {
    if templates.part1.is_empty() || templates.part3.is_empty() {
        return Err(Error::MissingTemplate("part 1 or part 3 has no variants".into()));
    }
    let part2 = templates
        .part2
        .get(&category.id)
        .ok_or_else(|| Error::MissingTemplate(format!("part 2 for {}", category.id)))?;
    let part4 = templates
        .part4
        .get(&category.id)
        .ok_or_else(|| Error::MissingTemplate(format!("part 4 for {}", category.id)))?;
    let n1 = templates.part1.len() as u64;
    let n3 = templates.part3.len() as u64;
    let part1 = &templates.part1[(variant_seed % n1) as usize];
    let part3 = &templates.part3[((variant_seed / n1 % n3 + 7 * (variant_seed % n3) + 3) % n3) as usize];

    let params_table = category
        .params
        .iter()
        .map(|p| {
            format!(
                "- {} = {} {} (allowed range {} to {} {})",
                p.name,
                task.initial_params.get(&p.name).copied().unwrap_or(f64::NAN),
                p.unit,
                p.lower,
                p.upper,
                p.unit
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let bound = library
        .lookup(&task.initial_material)
        .map(|m| format!("{}", task.stress_scale * m.allowable_stress))
        .unwrap_or_else(|_| "unknown".into());
    let values = [
        ("params_table", params_table),
        ("initial_material", task.initial_material.clone()),
        ("pressure_mpa", format!("{}", task.pressure_mpa)),
        ("delta_mm", format!("{}", task.delta_mm)),
        ("delta_um", format!("{:.3}", task.delta_mm * 1000.0)),
        ("kappa", format!("{}", task.kappa)),
        ("stress_scale", format!("{}", task.stress_scale)),
        ("stress_bound", bound),
        ("materials_table", materials_table(library)),
        ("max_rounds", task.max_rounds.to_string()),
        ("max_tool_calls", task.max_tool_calls.to_string()),
    ];
    Ok([part1, part2, part3, part4]
        .iter()
        .map(|t| fill(t, &values))
        .collect::<Vec<_>>()
        .join("\n\n")
        + "\n")
}
