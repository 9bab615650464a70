//! Batch episodes and evaluation reports.
//!
//! Evaluation trusts only the final JSON of each log: it is rebuilt and
//! solved again with failure injection off, and the seven aggregate metrics
//! are computed from those re-verified triples plus the log-based reward.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{parse_final, FinalDesign};
use crate::error::{Error, Result};
use crate::geometry::TemplateRegistry;
use crate::materials::MaterialLibrary;
use crate::metrics::{check_feasibility, evaluate_design, Feasibility, MetricTriple};
use crate::policies::{policy_by_name, run_policy, EpisodeOutcome};
use crate::reward::{score, ScoreRecord};
use crate::taskgen::{DatasetManifest, TaskInstance, MANIFEST_FILE};
use crate::toolserver::{FailureConfig, RolloutLog, ServerConfig, ToolServer};

pub const LOG_EXTENSION: &str = "ndjson";

/// Rebuilds and solves a submitted design without failure injection.
pub fn reproduce_final(
    design: &FinalDesign,
    task: &TaskInstance,
    registry: &TemplateRegistry,
    library: &MaterialLibrary,
    mesh_density: usize,
) -> Result<MetricTriple> {
    if design.category != task.category {
        return Err(Error::UnknownCategory(format!(
            "{} submitted for a {} task",
            design.category, task.category
        )));
    }
    let category = registry.get(&design.category)?;
    let material = library.lookup(&design.material)?;
    let params = category.params_from_map(&design.parameters)?;
    category.check_params(&params)?;
    evaluate_design(category, &params, material, &task.sim_settings(), mesh_density)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub task_id: String,
    pub log: String,
    pub final_design: Option<FinalDesign>,
    pub reverified: Option<MetricTriple>,
    /// Why re-verification produced no triple.
    pub failure: Option<String>,
    pub displacement_ok: bool,
    pub stress_ok: bool,
    pub cost_ok: bool,
    pub tool_calls: usize,
    pub score: ScoreRecord,
}

impl InstanceRecord {
    pub fn feasible(&self) -> bool {
        self.displacement_ok && self.stress_ok && self.cost_ok
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub FSR: f64,
    pub DSR: f64,
    pub SSR: f64,
    pub CSR: f64,
    pub MEO: f64,
    pub AS: f64,
    pub ATC: f64,
    pub n_instances: usize,
    pub instances: Vec<InstanceRecord>,
}

pub fn evaluate_instance(
    task_id: &str,
    task: &TaskInstance,
    log_ref: &str,
    log: &RolloutLog,
    registry: &TemplateRegistry,
    library: &MaterialLibrary,
    mesh_density: usize,
) -> InstanceRecord {
    let final_design = log.final_text().and_then(parse_final);
    let outcome = match &final_design {
        None => Err("no parsable final JSON".to_string()),
        Some(d) => reproduce_final(d, task, registry, library, mesh_density)
            .and_then(|t| Ok((t, library.lookup(&d.material)?)))
            .map_err(|e| e.to_string()),
    };
    let (reverified, failure, ok) = match outcome {
        Ok((t, m)) => (Some(t), None, check_feasibility(&t, &task.thresholds(m))),
        Err(e) => (None, Some(e), Feasibility::default()),
    };
    InstanceRecord {
        task_id: task_id.to_string(),
        log: log_ref.to_string(),
        final_design,
        reverified,
        failure,
        displacement_ok: ok.displacement_ok,
        stress_ok: ok.stress_ok,
        cost_ok: ok.cost_ok,
        tool_calls: log.tool_calls(),
        score: score(log, task, library),
    }
}

impl EvalReport {
    pub fn from_instances(instances: Vec<InstanceRecord>) -> Self {
        let n = instances.len();
        let rate = |f: &dyn Fn(&InstanceRecord) -> bool| {
            if n == 0 {
                0.0
            } else {
                instances.iter().filter(|r| f(r)).count() as f64 / n as f64
            }
        };
        let mean = |f: &dyn Fn(&InstanceRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                instances.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            FSR: rate(&InstanceRecord::feasible),
            DSR: rate(&|r| r.displacement_ok),
            SSR: rate(&|r| r.stress_ok),
            CSR: rate(&|r| r.cost_ok),
            MEO: rate(&|r| r.final_design.is_some()),
            AS: mean(&|r| r.score.R),
            ATC: mean(&|r| r.tool_calls as f64),
            n_instances: n,
            instances,
        }
    }

    /// FSR ≤ min(DSR, SSR, CSR) ≤ 1, FSR ≤ MEO, rates in [0, 1].
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let rates = [self.FSR, self.DSR, self.SSR, self.CSR, self.MEO];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(format!("rate outside [0, 1]: {rates:?}"));
        }
        if self.FSR > self.DSR.min(self.SSR).min(self.CSR) {
            return Err(format!("FSR {} exceeds a per-constraint rate", self.FSR));
        }
        if self.FSR > self.MEO {
            return Err(format!("FSR {} exceeds MEO {}", self.FSR, self.MEO));
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instances  {}", self.n_instances);
        for (name, v) in [
            ("FSR", self.FSR),
            ("DSR", self.DSR),
            ("SSR", self.SSR),
            ("CSR", self.CSR),
            ("MEO", self.MEO),
        ] {
            let _ = writeln!(out, "{name:<10} {:>6.1}%", 100.0 * v);
        }
        let _ = writeln!(out, "{:<10} {:>7.4}", "AS", self.AS);
        let _ = writeln!(out, "{:<10} {:>7.2}", "ATC", self.ATC);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes") + "\n"
    }
}

/// Re-verifies every task's log and aggregates. Task and log identifiers must
/// match one to one.
pub fn evaluate_run(
    tasks: &[(String, TaskInstance)],
    logs: &[(String, RolloutLog)],
    registry: &TemplateRegistry,
    library: &MaterialLibrary,
    mesh_density: usize,
) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &RolloutLog> = logs.iter().map(|(id, l)| (id.as_str(), l)).collect();
    let missing: Vec<&str> = tasks
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() || by_id.len() != tasks.len() || logs.len() != tasks.len() {
        return Err(Error::MismatchedSets(format!(
            "{} tasks and {} logs; tasks without a log: {:?}",
            tasks.len(),
            logs.len(),
            missing.iter().take(5).collect::<Vec<_>>()
        )));
    }
    let instances = tasks
        .par_iter()
        .map(|(id, task)| {
            let log_ref = format!("{id}.{LOG_EXTENSION}");
            evaluate_instance(id, task, &log_ref, by_id[id.as_str()], registry, library, mesh_density)
        })
        .collect();
    Ok(EvalReport::from_instances(instances))
}

/// Runs `policy` on every task against a shared in-process server.
pub fn run_episodes(
    tasks: &[(String, TaskInstance)],
    policy: &str,
    server: &ToolServer,
    failures: FailureConfig,
) -> Result<Vec<(String, EpisodeOutcome)>> {
    if policy_by_name(policy, 0).is_none() {
        return Err(Error::Format(format!("unknown policy `{policy}`")));
    }
    tasks
        .par_iter()
        .map(|(id, task)| {
            let mut p = policy_by_name(policy, task.seed).expect("checked above");
            let mut client = server;
            let outcome = run_policy(p.as_mut(), task, &mut client, failures, server.registry(), server.library())?;
            Ok((id.clone(), outcome))
        })
        .collect()
}

pub fn log_path(dir: impl AsRef<Path>, task_id: &str) -> PathBuf {
    dir.as_ref().join(format!("{task_id}.{LOG_EXTENSION}"))
}

pub fn save_logs<'a>(dir: impl AsRef<Path>, logs: impl IntoIterator<Item = (&'a str, &'a RolloutLog)>) -> Result<()> {
    for (id, log) in logs {
        let path = log_path(&dir, id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        log.save(path)?;
    }
    Ok(())
}

/// Logs under `dir` (searched one level deep), keyed like [`crate::taskgen::load_tasks`].
pub fn load_logs(dir: impl AsRef<Path>) -> Result<Vec<(String, RolloutLog)>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
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
    files.retain(|p| p.extension().is_some_and(|e| e == LOG_EXTENSION));
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let id = p.strip_prefix(dir).unwrap_or(&p).with_extension("");
            let id = id.to_string_lossy().replace('\\', "/");
            Ok((id, RolloutLog::load(&p)?))
        })
        .collect()
}

/// Mesh density recorded in a dataset's manifest, if any.
pub fn dataset_density(tasks_dir: impl AsRef<Path>) -> Option<usize> {
    DatasetManifest::load(tasks_dir.as_ref().join(MANIFEST_FILE))
        .ok()
        .map(|m| m.config.mesh_density)
}

pub fn server_for(mesh_density: usize) -> ToolServer {
    ToolServer::new(ServerConfig::with_density(mesh_density))
}

#[cfg(test)]
mod tests;
