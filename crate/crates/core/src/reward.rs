//! Rollout-log reward: R = R_cons + R_stop + R_fmt.
//!
//! Everything here reads the event log only. Metric triples are assembled
//! from the responses the tools already returned; nothing is re-simulated.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::design::{parse_final, DesignProposal};
use crate::geometry::ParamMap;
use crate::materials::MaterialLibrary;
use crate::metrics::MetricTriple;
use crate::taskgen::TaskInstance;
use crate::toolserver::{Event, EventKind, RolloutLog};

/// R_cons by number of satisfied constraints.
pub const CONS_TABLE: [f64; 4] = [0.0, 0.20, 0.50, 1.00];
pub const R_FMT: f64 = 0.10;
/// Per-event stop penalty and its cap, in hundredths.
const STOP_STEP_CENTS: usize = 2;
const STOP_CAP_CENTS: usize = 10;
/// Relative tolerance for matching final-answer parameters.
pub const PARAM_REL_TOL: f64 = 1e-6;

/// A complete (u_max, σ_max, C) observation of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    /// Index of the event that completed the triple.
    pub t_index: usize,
    pub triple: MetricTriple,
    pub category: String,
    pub design: DesignProposal,
}

struct Current {
    geometry_id: String,
    category: String,
    params: ParamMap,
    extracts: HashMap<String, (f64, f64)>,
    costs: HashMap<String, f64>,
}

fn str_field<'a>(v: Option<&'a Value>, key: &str) -> Option<&'a str> {
    v?.get(key)?.as_str()
}

fn num_field(v: Option<&Value>, key: &str) -> Option<f64> {
    v?.get(key)?.as_f64()
}

/// Triples in log order. A triple completes once, for the latest successful
/// generate_cad, both an extract_results (whose result came from run_cae on
/// that geometry) and a compute_cost (on that geometry) exist for the same
/// material.
pub fn parse_triples(log: &RolloutLog) -> Vec<TripleRecord> {
    let mut out = Vec::new();
    let mut current: Option<Current> = None;
    let mut results: HashMap<String, (String, String)> = HashMap::new();
    let events = &log.events;
    for (i, e) in events.iter().enumerate() {
        if e.kind != EventKind::ToolResponse || !e.success || i == 0 {
            continue;
        }
        let call: &Event = &events[i - 1];
        if call.kind != EventKind::ToolCall {
            continue;
        }
        let args = call.args();
        let result = e.result();
        match e.tool.as_deref() {
            Some("generate_cad") => {
                let (Some(gid), Some(cat), Some(params)) = (
                    str_field(result, "geometry_id"),
                    str_field(args, "category"),
                    args.and_then(|a| a.get("params")).and_then(|p| serde_json::from_value::<ParamMap>(p.clone()).ok()),
                ) else {
                    continue;
                };
                current = Some(Current {
                    geometry_id: gid.to_string(),
                    category: cat.to_string(),
                    params,
                    extracts: HashMap::new(),
                    costs: HashMap::new(),
                });
            }
            Some("run_cae") => {
                if let (Some(rid), Some(gid), Some(m)) = (
                    str_field(result, "result_id"),
                    str_field(args, "geometry_id"),
                    str_field(args, "material"),
                ) {
                    results.insert(rid.to_string(), (gid.to_string(), m.to_string()));
                }
            }
            Some("extract_results") => {
                let (Some(cur), Some(rid), Some(u), Some(s)) = (
                    current.as_mut(),
                    str_field(args, "result_id"),
                    num_field(result, "u_max"),
                    num_field(result, "sigma_max"),
                ) else {
                    continue;
                };
                let Some((gid, material)) = results.get(rid) else {
                    continue;
                };
                if *gid != cur.geometry_id {
                    continue;
                }
                cur.extracts.insert(material.clone(), (u, s));
                if let Some(&c) = cur.costs.get(material) {
                    out.push(record(e.t, cur, material, (u, s), c));
                }
            }
            Some("compute_cost") => {
                let (Some(cur), Some(gid), Some(material), Some(c)) = (
                    current.as_mut(),
                    str_field(args, "geometry_id"),
                    str_field(args, "material"),
                    num_field(result, "cost"),
                ) else {
                    continue;
                };
                if gid != cur.geometry_id {
                    continue;
                }
                cur.costs.insert(material.to_string(), c);
                if let Some(&us) = cur.extracts.get(material) {
                    out.push(record(e.t, cur, material, us, c));
                }
            }
            _ => {}
        }
    }
    out
}

fn record(t: usize, cur: &Current, material: &str, (u_max, sigma_max): (f64, f64), cost: f64) -> TripleRecord {
    TripleRecord {
        t_index: t,
        triple: MetricTriple { u_max, sigma_max, cost },
        category: cur.category.clone(),
        design: DesignProposal {
            params: cur.params.clone(),
            material: material.to_string(),
        },
    }
}

/// Satisfied constraints of a triple; an unknown material fails the stress
/// check only.
pub fn constraint_count(record: &TripleRecord, task: &TaskInstance, library: &MaterialLibrary) -> u8 {
    let t = &record.triple;
    let stress_ok = library
        .lookup(&record.design.material)
        .is_ok_and(|m| t.sigma_max <= task.stress_bound(m));
    (t.u_max <= task.delta_mm) as u8 + (t.cost <= task.kappa) as u8 + stress_ok as u8
}

pub fn cons_value(n: u8) -> f64 {
    CONS_TABLE[n.min(3) as usize]
}

/// −min(λK, λ_max) with λ = 0.02 and λ_max = 0.10.
pub fn stop_penalty(k: usize) -> f64 {
    0.0 - (STOP_STEP_CENTS * k).min(STOP_CAP_CENTS) as f64 / 100.0
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub R_cons: f64,
    pub R_stop: f64,
    pub R_fmt: f64,
    pub R: f64,
    pub N_last: Option<u8>,
    pub t_feas: Option<usize>,
    pub K: usize,
}

fn first_feasible(triples: &[TripleRecord], task: &TaskInstance, library: &MaterialLibrary) -> Option<usize> {
    triples
        .iter()
        .find(|r| constraint_count(r, task, library) == 3)
        .map(|r| r.t_index)
}

fn post_feasible_events(log: &RolloutLog, t_feas: usize) -> usize {
    log.events
        .iter()
        .filter(|e| e.t > t_feas && e.kind.is_tool_traffic())
        .count()
}

pub fn reward_cons(log: &RolloutLog, task: &TaskInstance, library: &MaterialLibrary) -> f64 {
    parse_triples(log)
        .last()
        .map_or(0.0, |r| cons_value(constraint_count(r, task, library)))
}

pub fn reward_stop(log: &RolloutLog, task: &TaskInstance, library: &MaterialLibrary) -> f64 {
    let triples = parse_triples(log);
    first_feasible(&triples, task, library).map_or(0.0, |t| stop_penalty(post_feasible_events(log, t)))
}

pub fn reward_fmt(log: &RolloutLog, _task: &TaskInstance, _library: &MaterialLibrary) -> f64 {
    fmt_value(log, parse_triples(log).last())
}

fn fmt_value(log: &RolloutLog, last: Option<&TripleRecord>) -> f64 {
    let (Some(last), Some(text)) = (last, log.final_text()) else {
        return 0.0;
    };
    match parse_final(text) {
        Some(f) if f.consistent_with(&last.category, &last.design, PARAM_REL_TOL) => R_FMT,
        _ => 0.0,
    }
}

pub fn score(log: &RolloutLog, task: &TaskInstance, library: &MaterialLibrary) -> ScoreRecord {
    let triples = parse_triples(log);
    let last = triples.last();
    let n_last = last.map(|r| constraint_count(r, task, library));
    let t_feas = first_feasible(&triples, task, library);
    let k = t_feas.map_or(0, |t| post_feasible_events(log, t));
    let r_cons = n_last.map_or(0.0, cons_value);
    let r_stop = if t_feas.is_some() { stop_penalty(k) } else { 0.0 };
    let r_fmt = fmt_value(log, last);
    ScoreRecord {
        R_cons: r_cons,
        R_stop: r_stop,
        R_fmt: r_fmt,
        R: r_cons + r_stop + r_fmt,
        N_last: n_last,
        t_feas,
        K: k,
    }
}

pub fn total_reward(log: &RolloutLog, task: &TaskInstance, library: &MaterialLibrary) -> f64 {
    score(log, task, library).R
}

#[cfg(test)]
mod tests;
