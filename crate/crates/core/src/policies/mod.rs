//! Scripted designers that drive the tool server over its protocol.
//!
//! A [`Policy`] proposes designs and reacts to observations; [`run_policy`]
//! turns that into a protocol-level episode: one `policy_message` per round,
//! the four tool calls, and a final JSON answer.

mod client;
mod heuristic;
mod search;

pub use client::{ToolClient, WireClient};
pub use heuristic::{apply_step, plan_step, Heuristic, Step};
pub use search::{NelderMead, NelderMeadPolicy, RandomSearch, SubmitInitial, FAILURE_PENALTY};

use serde_json::{json, Value};

use crate::design::{DesignProposal, FinalDesign};
use crate::error::{Error, Result};
use crate::geometry::{PartCategory, TemplateRegistry};
use crate::materials::MaterialLibrary;
use crate::metrics::{check_feasibility, MetricTriple};
use crate::taskgen::TaskInstance;
use crate::toolserver::{EpisodeState, ErrorCode, FailureConfig, Request, Response, RolloutLog};

/// Proposals are rounded to 1/STEPS_PER_MM before clamping.
pub const STEPS_PER_MM: f64 = 100.0;
/// Tool calls in one design iteration.
pub const CALLS_PER_ROUND: usize = 4;

/// What one design iteration produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Metrics(MetricTriple),
    /// A tool call failed; the code is absent if the response was unreadable.
    Failure(Option<ErrorCode>),
}

impl Observation {
    pub fn is_budget_stop(&self) -> bool {
        matches!(
            self,
            Observation::Failure(Some(ErrorCode::BudgetExhausted | ErrorCode::RoundLimit | ErrorCode::EpisodeClosed))
        )
    }
}

/// Task knowledge available to a policy.
pub struct PolicyContext<'a> {
    pub task: &'a TaskInstance,
    pub category: &'a PartCategory,
    pub library: &'a MaterialLibrary,
}

impl PolicyContext<'_> {
    /// Rounds to the parameter grid and clamps into bounds.
    pub fn clamp_design(&self, mut design: DesignProposal) -> DesignProposal {
        for spec in &self.category.params {
            if let Some(v) = design.params.get_mut(&spec.name) {
                let rounded = (*v * STEPS_PER_MM).round() / STEPS_PER_MM;
                *v = rounded.clamp(spec.lower, spec.upper);
            }
        }
        design
    }

    /// Satisfied constraints (0 to 3); an unknown material fails the stress check.
    pub fn satisfied(&self, design: &DesignProposal, t: &MetricTriple) -> u8 {
        match self.library.lookup(&design.material) {
            Ok(m) => check_feasibility(t, &self.task.thresholds(m)).count(),
            Err(_) => (t.u_max <= self.task.delta_mm) as u8 + (t.cost <= self.task.kappa) as u8,
        }
    }

    pub fn feasible(&self, design: &DesignProposal, t: &MetricTriple) -> bool {
        self.satisfied(design, t) == 3
    }

    /// Σ max(0, metric / threshold − 1) over the three constraints.
    pub fn penalty(&self, design: &DesignProposal, t: &MetricTriple) -> f64 {
        let Ok(m) = self.library.lookup(&design.material) else {
            return FAILURE_PENALTY;
        };
        let th = self.task.thresholds(m);
        [(t.u_max, th.delta), (t.sigma_max, th.stress_bound), (t.cost, th.kappa)]
            .iter()
            .map(|&(v, limit)| (v / limit - 1.0).max(0.0))
            .sum()
    }
}

/// Proposes designs and reacts to their outcomes.
pub trait Policy {
    fn name(&self) -> &'static str;
    fn first(&mut self, ctx: &PolicyContext) -> DesignProposal;
    /// Next design after `last` produced `obs`; `None` ends the search.
    fn next(&mut self, ctx: &PolicyContext, last: &DesignProposal, obs: &Observation) -> Option<DesignProposal>;
}

pub fn policy_by_name(name: &str, seed: u64) -> Option<Box<dyn Policy>> {
    Some(match name {
        "heuristic" => Box::new(Heuristic::new(seed)),
        "submit_initial" => Box::new(SubmitInitial),
        "random_search" => Box::new(RandomSearch::new(seed)),
        "nelder_mead" => Box::new(NelderMeadPolicy::default()),
        _ => return None,
    })
}

pub const POLICY_NAMES: [&str; 4] = ["heuristic", "submit_initial", "random_search", "nelder_mead"];

/// Result of one driven episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub episode_id: String,
    pub log: RolloutLog,
    pub state: Option<EpisodeState>,
    pub submitted: FinalDesign,
    pub rounds: usize,
}

struct Session<'c> {
    client: &'c mut dyn ToolClient,
    episode_id: String,
    next_call: u64,
    calls: usize,
    rounds: usize,
    max_calls: usize,
    max_rounds: usize,
}

fn failure(r: &Response) -> Observation {
    Observation::Failure(r.error_code())
}

impl Session<'_> {
    fn send(&mut self, tool: &str, args: Value) -> Result<Response> {
        self.next_call += 1;
        let req = Request::new(Some(&self.episode_id), self.next_call, tool, args);
        self.client.request(req)
    }

    fn tool(&mut self, tool: &str, args: Value) -> Result<Response> {
        self.calls += 1;
        self.send(tool, args)
    }

    fn message(&mut self, text: String) -> Result<Response> {
        let r = self.send("policy_message", json!({ "text": text }))?;
        if r.success {
            self.rounds += 1;
        }
        Ok(r)
    }

    fn handle(r: &Response, key: &str) -> Option<String> {
        r.get(key).and_then(Value::as_str).map(str::to_string)
    }

    fn iterate(&mut self, category: &str, d: &DesignProposal) -> Result<Observation> {
        let g = self.tool("generate_cad", json!({ "category": category, "params": d.params }))?;
        let Some(gid) = Self::handle(&g, "geometry_id") else {
            return Ok(failure(&g));
        };
        let r = self.tool("run_cae", json!({ "geometry_id": gid, "material": d.material }))?;
        let Some(rid) = Self::handle(&r, "result_id") else {
            return Ok(failure(&r));
        };
        let x = self.tool("extract_results", json!({ "result_id": rid }))?;
        let (Some(u_max), Some(sigma_max)) = (
            x.get("u_max").and_then(Value::as_f64),
            x.get("sigma_max").and_then(Value::as_f64),
        ) else {
            return Ok(failure(&x));
        };
        let c = self.tool("compute_cost", json!({ "geometry_id": gid, "material": d.material }))?;
        let Some(cost) = c.get("cost").and_then(Value::as_f64) else {
            return Ok(failure(&c));
        };
        Ok(Observation::Metrics(MetricTriple { u_max, sigma_max, cost }))
    }

    fn room_for(&self, rounds: usize) -> bool {
        self.rounds + rounds <= self.max_rounds && self.calls + CALLS_PER_ROUND * rounds <= self.max_calls
    }
}

fn describe(d: &DesignProposal) -> String {
    let params: Vec<String> = d.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{} in {}", params.join(", "), d.material)
}

/// Best first by satisfied-constraint count, then by penalty.
fn better(ctx: &PolicyContext, a: (&DesignProposal, &MetricTriple), b: (&DesignProposal, &MetricTriple)) -> bool {
    let (na, nb) = (ctx.satisfied(a.0, a.1), ctx.satisfied(b.0, b.1));
    na > nb || (na == nb && ctx.penalty(a.0, a.1) < ctx.penalty(b.0, b.1))
}

/// Drives one episode to completion.
///
/// Stops at the first feasible triple. Otherwise it iterates until the
/// policy gives up or the budgets run out, keeping enough budget to re-run
/// the best design seen so that the submitted JSON always describes the
/// last complete triple in the log.
pub fn run_policy(
    policy: &mut dyn Policy,
    task: &TaskInstance,
    client: &mut dyn ToolClient,
    failures: FailureConfig,
    registry: &TemplateRegistry,
    library: &MaterialLibrary,
) -> Result<EpisodeOutcome> {
    let ctx = PolicyContext {
        task,
        category: registry.get(&task.category)?,
        library,
    };
    let open = client.request(Request::new(None, 0, "open_episode", json!({ "task": task, "failures": failures })))?;
    let episode_id = Session::handle(&open, "episode_id")
        .ok_or_else(|| Error::Format(format!("open_episode failed: {:?}", open.error)))?;
    let limit = |key: &str, default: usize| open.get(key).and_then(Value::as_u64).map_or(default, |v| v as usize);
    let mut s = Session {
        client,
        episode_id: episode_id.clone(),
        next_call: 0,
        calls: 0,
        rounds: 0,
        max_calls: limit("max_tool_calls", task.max_tool_calls),
        max_rounds: limit("max_rounds", task.max_rounds),
    };

    let mut proposal = ctx.clamp_design(policy.first(&ctx));
    let mut best: Option<(DesignProposal, MetricTriple)> = None;
    let mut last_measured: Option<DesignProposal> = None;
    let mut stopped = false;
    loop {
        // a new round may end worse than the best so far, which then has to be re-run
        if !s.room_for(1 + best.is_some() as usize) {
            break;
        }
        let msg = s.message(format!("round {}: trying {}", s.rounds + 1, describe(&proposal)))?;
        if !msg.success {
            stopped = true;
            break;
        }
        let obs = s.iterate(&task.category, &proposal)?;
        if let Observation::Metrics(t) = &obs {
            last_measured = Some(proposal.clone());
            if best.as_ref().is_none_or(|(d, bt)| better(&ctx, (&proposal, t), (d, bt))) {
                best = Some((proposal.clone(), *t));
            }
            if ctx.feasible(&proposal, t) {
                break;
            }
        }
        if obs.is_budget_stop() {
            stopped = true;
            break;
        }
        match policy.next(&ctx, &proposal, &obs) {
            Some(p) => proposal = ctx.clamp_design(p),
            None => break,
        }
    }

    if let Some((d, _)) = &best {
        if !stopped && Some(d) != last_measured.as_ref() && s.room_for(1) {
            let msg = s.message(format!("re-running the best design: {}", describe(d)))?;
            if msg.success {
                if let Observation::Metrics(_) = s.iterate(&task.category, d)? {
                    last_measured = Some(d.clone());
                }
            }
        }
    }

    let chosen = best.map(|(d, _)| d).or(last_measured).unwrap_or(proposal);
    let submitted = FinalDesign::new(&task.category, &chosen);
    s.send("submit_final", json!({ "text": format!("Final design:\n{}", submitted.to_json()) }))?;
    let closed = s.send("close_episode", json!({}))?;
    let log: RolloutLog = closed
        .payload
        .clone()
        .map(serde_json::from_value)
        .transpose()?
        .ok_or_else(|| Error::Format(format!("close_episode failed: {:?}", closed.error)))?;
    let state = closed.get("state").cloned().and_then(|v| serde_json::from_value(v).ok());
    Ok(EpisodeOutcome {
        episode_id,
        log,
        state,
        submitted,
        rounds: s.rounds,
    })
}
