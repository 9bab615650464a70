//! Task synthesis: baseline simulation, threshold reduction, feasibility
//! screening and prompt assembly.
//!
//! Every task starts from a random in-bounds design whose load is calibrated
//! so that the peak von Mises stress sits just under the allowable stress of
//! the initial material. Thresholds are then set from the simulated baseline,
//! with one, two or three of them tightened.

mod prompt;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use prompt::{build_prompt, PromptTemplates};

use crate::design::DesignProposal;
use crate::error::{Error, Result};
use crate::fem::SimSettings;
use crate::geometry::{generate_solid, ParamMap, ParamVector, PartCategory, Split, TemplateRegistry};
use crate::materials::{MaterialLibrary, MaterialProps};
use crate::metrics::{check_feasibility, cost, evaluate_design, MetricTriple, Thresholds};

pub const DEFAULT_MAX_ROUNDS: usize = 15;
pub const DEFAULT_MAX_TOOL_CALLS: usize = 60;
pub const DEFAULT_SEARCH_BUDGET: usize = 400;

/// One optimization task, in its on-disk form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstance {
    pub category: String,
    pub initial_params: ParamMap,
    pub initial_material: String,
    pub pressure_mpa: f64,
    pub delta_mm: f64,
    pub kappa: f64,
    /// Effective stress bound is `stress_scale · σ_allow(material)`.
    pub stress_scale: f64,
    pub max_rounds: usize,
    pub max_tool_calls: usize,
    pub seed: u64,
}

impl TaskInstance {
    pub fn validate(&self, registry: &TemplateRegistry, library: &MaterialLibrary) -> Result<()> {
        let category = registry.get(&self.category)?;
        category.check_params(&category.params_from_map(&self.initial_params)?)?;
        library.lookup(&self.initial_material)?;
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.delta_mm) && ok(self.kappa) && ok(self.stress_scale) && self.stress_scale <= 1.0) {
            return Err(Error::Format(format!(
                "thresholds out of range: delta {} kappa {} stress_scale {}",
                self.delta_mm, self.kappa, self.stress_scale
            )));
        }
        if !self.pressure_mpa.is_finite() || self.max_rounds == 0 || self.max_tool_calls == 0 {
            return Err(Error::Format("pressure must be finite and budgets positive".into()));
        }
        Ok(())
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings::pressure(self.pressure_mpa)
    }

    pub fn initial_design(&self) -> DesignProposal {
        DesignProposal {
            params: self.initial_params.clone(),
            material: self.initial_material.clone(),
        }
    }

    pub fn stress_bound(&self, material: &MaterialProps) -> f64 {
        self.stress_scale * material.allowable_stress
    }

    pub fn thresholds(&self, material: &MaterialProps) -> Thresholds {
        Thresholds {
            delta: self.delta_mm,
            stress_bound: self.stress_bound(material),
            kappa: self.kappa,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Which constraint a reduction tightens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedItem {
    Displacement,
    Cost,
    Stress,
}

impl ReducedItem {
    pub const ALL: [ReducedItem; 3] = [ReducedItem::Displacement, ReducedItem::Cost, ReducedItem::Stress];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionPolicy {
    pub standard_range: [f64; 2],
    pub extreme_value: f64,
    pub extreme_fraction: f64,
    /// Fixed number of tightened items; uniform over {1, 2, 3} when unset.
    pub items_to_reduce: Option<usize>,
}

impl Default for ReductionPolicy {
    fn default() -> Self {
        Self {
            standard_range: [0.05, 0.10],
            extreme_value: 0.30,
            extreme_fraction: 0.10,
            items_to_reduce: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemReduction {
    pub item: ReducedItem,
    pub r: f64,
}

/// A drawn reduction plan. `extreme` tasks tighten every chosen item by the
/// extreme value; standard tasks draw each item's ratio independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub extreme: bool,
    pub items: Vec<ItemReduction>,
}

impl Reduction {
    pub fn ratio(&self, item: ReducedItem) -> Option<f64> {
        self.items.iter().find(|x| x.item == item).map(|x| x.r)
    }
}

pub fn draw_reduction(policy: &ReductionPolicy, rng: &mut impl Rng) -> Reduction {
    let k = policy.items_to_reduce.unwrap_or_else(|| rng.gen_range(1..=3)).clamp(1, 3);
    let mut items: Vec<ReducedItem> = ReducedItem::ALL.choose_multiple(rng, k).copied().collect();
    items.sort();
    let extreme = rng.gen_bool(policy.extreme_fraction);
    let [lo, hi] = policy.standard_range;
    let items = items
        .into_iter()
        .map(|item| ItemReduction {
            item,
            r: if extreme { policy.extreme_value } else { rng.gen_range(lo..=hi) },
        })
        .collect();
    Reduction { extreme, items }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub delta_mm: f64,
    pub kappa: f64,
    pub stress_scale: f64,
}

/// Thresholds from a baseline: reduced items are scaled by `1 − r`, the rest
/// equal the baseline.
pub fn apply_reduction(baseline: &MetricTriple, reduction: &Reduction) -> Annotation {
    let keep = |item| 1.0 - reduction.ratio(item).unwrap_or(0.0);
    Annotation {
        delta_mm: baseline.u_max * keep(ReducedItem::Displacement),
        kappa: baseline.cost * keep(ReducedItem::Cost),
        stress_scale: keep(ReducedItem::Stress),
    }
}

pub fn annotate_thresholds(
    baseline: &MetricTriple,
    policy: &ReductionPolicy,
    rng: &mut impl Rng,
) -> (Annotation, Reduction) {
    let reduction = draw_reduction(policy, rng);
    (apply_reduction(baseline, &reduction), reduction)
}

/// Ground-truth triple of a design: one generate → solve → extract pass.
pub fn baseline_metrics(
    category: &PartCategory,
    params: &ParamVector,
    material: &MaterialProps,
    settings: &SimSettings,
    mesh_density: usize,
) -> Result<MetricTriple> {
    evaluate_design(category, params, material, settings, mesh_density)
}

/// Largest pressure with four significant digits whose peak stress stays
/// within `stress_limit`, from the peak stress under unit pressure.
pub fn calibrate_pressure(unit_stress: f64, stress_limit: f64) -> f64 {
    let raw = stress_limit / unit_stress;
    let step = 10f64.powi(raw.log10().floor() as i32 - 3);
    let p: f64 = format!("{:.3e}", (raw / step).floor() * step).parse().expect("formatted float parses");
    if p > raw {
        format!("{:.3e}", p - step).parse().expect("formatted float parses")
    } else {
        p
    }
}

/// The five grid levels of a parameter: both bounds and the three quartiles.
pub fn grid_levels(lower: f64, upper: f64) -> [f64; 5] {
    std::array::from_fn(|k| if k == 4 { upper } else { lower + (upper - lower) * k as f64 / 4.0 })
}

#[derive(Debug, Clone, Copy)]
struct UnitResponse {
    u_max: f64,
    sigma_max: f64,
}

/// Grid search for any design meeting a task's thresholds.
///
/// Peak displacement and stress are linear in the load, so each
/// (geometry, material) pair is solved once under unit pressure and scaled;
/// results are kept across tasks.
#[derive(Debug, Default)]
pub struct FeasibilityOracle {
    mesh_density: usize,
    volumes: HashMap<(String, Vec<u8>), Option<f64>>,
    responses: HashMap<(String, Vec<u8>, String), Option<UnitResponse>>,
    pub solves: usize,
}

impl FeasibilityOracle {
    pub fn new(mesh_density: usize) -> Self {
        Self {
            mesh_density,
            ..Self::default()
        }
    }

    fn volume(&mut self, category: &PartCategory, levels: &[u8]) -> Option<f64> {
        let key = (category.id.clone(), levels.to_vec());
        let d = self.mesh_density;
        *self
            .volumes
            .entry(key)
            .or_insert_with(|| generate_solid(category, &grid_point(category, levels), d).ok().map(|s| s.volume_mm3))
    }

    fn response(&mut self, category: &PartCategory, levels: &[u8], material: &MaterialProps) -> Option<UnitResponse> {
        let key = (category.id.clone(), levels.to_vec(), material.name.clone());
        if let Some(hit) = self.responses.get(&key) {
            return *hit;
        }
        self.solves += 1;
        let params = grid_point(category, levels);
        let out = evaluate_design(category, &params, material, &SimSettings::pressure(1.0), self.mesh_density)
            .ok()
            .map(|t| UnitResponse {
                u_max: t.u_max,
                sigma_max: t.sigma_max,
            });
        self.responses.insert(key, out);
        out
    }

    /// Tries the task's initial design, then at most `search_budget − 1`
    /// (grid point, material) candidates in random order; true when any of
    /// them satisfies all three constraints.
    pub fn check(
        &mut self,
        task: &TaskInstance,
        category: &PartCategory,
        library: &MaterialLibrary,
        search_budget: usize,
        rng: &mut impl Rng,
    ) -> bool {
        if search_budget == 0 {
            return false;
        }
        let initial = category.params_from_map(&task.initial_params).ok();
        if let (Some(params), Ok(material)) = (initial, library.lookup(&task.initial_material)) {
            self.solves += 1;
            let triple = evaluate_design(category, &params, material, &task.sim_settings(), self.mesh_density);
            if triple.is_ok_and(|t| check_feasibility(&t, &task.thresholds(material)).all()) {
                return true;
            }
        }
        let n = category.params.len();
        let materials: Vec<&MaterialProps> = library.iter().collect();
        let grid = 5usize.pow(n as u32);
        let mut order: Vec<usize> = (0..grid * materials.len()).collect();
        order.shuffle(rng);
        for &c in order.iter().take(search_budget - 1) {
            let material = materials[c % materials.len()];
            let mut g = c / materials.len();
            let levels: Vec<u8> = (0..n)
                .map(|_| {
                    let l = (g % 5) as u8;
                    g /= 5;
                    l
                })
                .collect();
            let Some(volume) = self.volume(category, &levels) else {
                continue;
            };
            let thresholds = task.thresholds(material);
            if cost(volume, material) > thresholds.kappa {
                continue;
            }
            let Some(unit) = self.response(category, &levels, material) else {
                continue;
            };
            let triple = MetricTriple {
                u_max: task.pressure_mpa * unit.u_max,
                sigma_max: task.pressure_mpa * unit.sigma_max,
                cost: cost(volume, material),
            };
            if check_feasibility(&triple, &thresholds).all() {
                return true;
            }
        }
        false
    }
}

fn grid_point(category: &PartCategory, levels: &[u8]) -> ParamVector {
    category
        .params
        .iter()
        .zip(levels)
        .map(|(p, &l)| grid_levels(p.lower, p.upper)[l as usize])
        .collect::<Vec<_>>()
        .into()
}

/// Stand-alone feasibility check with a fresh cache, ordered by the task seed.
pub fn feasibility_check(
    task: &TaskInstance,
    registry: &TemplateRegistry,
    library: &MaterialLibrary,
    mesh_density: usize,
    search_budget: usize,
) -> Result<bool> {
    let category = registry.get(&task.category)?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    Ok(FeasibilityOracle::new(mesh_density).check(task, category, library, search_budget, &mut rng))
}

/// Independent generator stream for task `index` of a dataset.
pub fn task_rng(dataset_seed: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&dataset_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub mesh_density: usize,
    pub search_budget: usize,
    pub policy: ReductionPolicy,
    pub max_rounds: usize,
    pub max_tool_calls: usize,
    /// Initial designs rejected before the reduction plan is redrawn.
    pub max_design_attempts: usize,
    /// Initial parameters are drawn from the bounds shrunk by this fraction
    /// of their range at each end, then rounded to 0.1 mm.
    pub sample_margin: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            mesh_density: 4,
            search_budget: DEFAULT_SEARCH_BUDGET,
            policy: ReductionPolicy::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            max_tool_calls: DEFAULT_MAX_TOOL_CALLS,
            max_design_attempts: 40,
            sample_margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTask {
    pub task: TaskInstance,
    pub reduction: Reduction,
    pub baseline: MetricTriple,
    /// Initial designs drawn, including rejected ones.
    pub design_attempts: usize,
    pub reduction_redraws: usize,
}

pub struct TaskGenerator {
    pub registry: TemplateRegistry,
    pub library: MaterialLibrary,
    pub config: GeneratorConfig,
    oracle: FeasibilityOracle,
}

impl TaskGenerator {
    pub fn new(registry: TemplateRegistry, library: MaterialLibrary, config: GeneratorConfig) -> Self {
        let oracle = FeasibilityOracle::new(config.mesh_density);
        Self {
            registry,
            library,
            config,
            oracle,
        }
    }

    pub fn oracle_solves(&self) -> usize {
        self.oracle.solves
    }

    fn sample_design(&self, category: &PartCategory, rng: &mut impl Rng) -> (ParamVector, usize) {
        let m = self.config.sample_margin;
        let params = category
            .params
            .iter()
            .map(|p| {
                let span = p.upper - p.lower;
                let v: f64 = rng.gen_range(p.lower + m * span..=p.upper - m * span);
                ((v * 10.0).round() / 10.0).clamp(p.lower, p.upper)
            })
            .collect::<Vec<_>>();
        (params.into(), rng.gen_range(0..self.library.len()))
    }

    /// Baseline of a candidate initial design, with the load calibrated to
    /// its material's allowable stress.
    fn calibrated_baseline(
        &self,
        category: &PartCategory,
        params: &ParamVector,
        material: &MaterialProps,
    ) -> Option<(f64, MetricTriple)> {
        let d = self.config.mesh_density;
        let unit = evaluate_design(category, params, material, &SimSettings::pressure(1.0), d).ok()?;
        if !(unit.sigma_max > 0.0 && unit.u_max > 0.0) {
            return None;
        }
        let pressure = calibrate_pressure(unit.sigma_max, material.allowable_stress);
        let baseline = baseline_metrics(category, params, material, &SimSettings::pressure(pressure), d).ok()?;
        (baseline.is_valid() && baseline.u_max > 0.0 && baseline.sigma_max <= material.allowable_stress)
            .then_some((pressure, baseline))
    }

    /// Task `index` of a dataset drawn from `categories`. The reduction plan
    /// is drawn first and kept while initial designs are resampled, so
    /// rejection does not bias the reduction statistics.
    pub fn generate(&mut self, categories: &[&PartCategory], dataset_seed: u64, index: u64) -> Result<GeneratedTask> {
        if categories.is_empty() {
            return Err(Error::InsufficientCategories(0));
        }
        let mut rng = task_rng(dataset_seed, index);
        let category = categories[rng.gen_range(0..categories.len())];
        let seed = rng.next_u64();
        let mut attempts = 0;
        for redraws in 0.. {
            let reduction = draw_reduction(&self.config.policy, &mut rng);
            for _ in 0..self.config.max_design_attempts {
                attempts += 1;
                let (params, m) = self.sample_design(category, &mut rng);
                let material = self.library.iter().nth(m).expect("index in range").clone();
                let Some((pressure, baseline)) = self.calibrated_baseline(category, &params, &material) else {
                    continue;
                };
                let a = apply_reduction(&baseline, &reduction);
                let task = TaskInstance {
                    category: category.id.clone(),
                    initial_params: category.params_to_map(&params),
                    initial_material: material.name.clone(),
                    pressure_mpa: pressure,
                    delta_mm: a.delta_mm,
                    kappa: a.kappa,
                    stress_scale: a.stress_scale,
                    max_rounds: self.config.max_rounds,
                    max_tool_calls: self.config.max_tool_calls,
                    seed,
                };
                if task.validate(&self.registry, &self.library).is_err() {
                    continue;
                }
                if self
                    .oracle
                    .check(&task, category, &self.library, self.config.search_budget, &mut rng)
                {
                    return Ok(GeneratedTask {
                        task,
                        reduction,
                        baseline,
                        design_attempts: attempts,
                        reduction_redraws: redraws,
                    });
                }
            }
        }
        unreachable!("the redraw loop only exits by returning")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train: usize,
    pub test: usize,
    pub general: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub split: String,
    #[serde(flatten)]
    pub generated: GeneratedTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub sizes: DatasetSizes,
    pub config: GeneratorConfig,
    pub tasks: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Generates train/test tasks over the main categories and generalization
/// tasks over the held-out ones. Task `i` of the whole dataset uses stream
/// `i` of `seed`, with train, test and generalization numbered in that order.
pub fn generate_dataset(generator: &mut TaskGenerator, sizes: DatasetSizes, seed: u64) -> Result<DatasetManifest> {
    let main: Vec<PartCategory> = generator.registry.split(Split::Main).cloned().collect();
    let held: Vec<PartCategory> = generator.registry.split(Split::HeldOut).cloned().collect();
    let total = generator.registry.categories().len();
    if total < 2 || main.is_empty() || (sizes.general > 0 && held.is_empty()) {
        return Err(Error::InsufficientCategories(total));
    }
    let main: Vec<&PartCategory> = main.iter().collect();
    let held: Vec<&PartCategory> = held.iter().collect();
    let plan = [("train", sizes.train, &main), ("test", sizes.test, &main), ("general", sizes.general, &held)];
    let mut tasks = Vec::with_capacity(sizes.train + sizes.test + sizes.general);
    let mut index = 0u64;
    for (split, n, categories) in plan {
        for i in 0..n {
            let generated = generator.generate(categories, seed, index)?;
            tasks.push(ManifestEntry {
                file: format!("{split}/{split}_{i:05}.json"),
                split: split.to_string(),
                generated,
            });
            index += 1;
        }
    }
    Ok(DatasetManifest {
        seed,
        sizes,
        config: generator.config,
        tasks,
    })
}

/// Writes one JSON file and one prompt file per task plus the manifest.
pub fn write_dataset(
    manifest: &DatasetManifest,
    generator: &TaskGenerator,
    templates: &PromptTemplates,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out = out_dir.as_ref();
    for entry in &manifest.tasks {
        let path = out.join(&entry.file);
        std::fs::create_dir_all(path.parent().expect("task files live in a split dir"))?;
        let task = &entry.generated.task;
        std::fs::write(&path, task.to_json())?;
        let category = generator.registry.get(&task.category)?;
        let prompt = build_prompt(task, category, &generator.library, templates, task.seed)?;
        std::fs::write(path.with_extension("prompt.txt"), prompt)?;
    }
    std::fs::write(
        out.join(MANIFEST_FILE),
        serde_json::to_string_pretty(manifest)? + "\n",
    )?;
    Ok(())
}

pub fn export_dataset(
    out_dir: impl AsRef<Path>,
    sizes: DatasetSizes,
    config: GeneratorConfig,
    seed: u64,
) -> Result<DatasetManifest> {
    let mut generator = TaskGenerator::new(
        crate::geometry::default_registry().clone(),
        crate::materials::default_library().clone(),
        config,
    );
    let manifest = generate_dataset(&mut generator, sizes, seed)?;
    write_dataset(&manifest, &generator, &PromptTemplates::builtin(), out_dir)?;
    Ok(manifest)
}

/// Task files under `dir` (searched one level deep), sorted by path. The
/// identifier is the path relative to `dir` without extension.
pub fn load_tasks(dir: impl AsRef<Path>) -> Result<Vec<(String, TaskInstance)>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            for inner in std::fs::read_dir(&path)? {
                files.push(inner?.path());
            }
        } else {
            files.push(path);
        }
    }
    files.retain(|p| {
        p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != MANIFEST_FILE)
    });
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let id = p
                .strip_prefix(dir)
                .unwrap_or(&p)
                .with_extension("")
                .to_string_lossy()
                .replace('\\', "/");
            Ok((id, TaskInstance::load(&p)?))
        })
        .collect()
}
