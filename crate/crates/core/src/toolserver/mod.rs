//! The interactive environment: episodes, the four design tools, budgets,
//! failure injection and rollout logging.
//!
//! Handles returned by the tools are opaque strings scoped to one episode.
//! Every dispatched tool call, successful or not, consumes one unit of the
//! tool-call budget; each `policy_message` consumes one round.

pub mod conformance;
mod log;
mod protocol;
mod wire;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use log::{Event, EventKind, RolloutLog};
pub use protocol::{ErrorBody, ErrorCode, Request, Response, CONTROL, DESCRIPTOR, TOOLS};
pub use wire::{serve_lines, serve_tcp};

use crate::design::parse_final;
use crate::error::{Error, Result};
use crate::fem::{default_epsilon, solve_static};
use crate::geometry::{default_registry, generate_solid, ParamMap, SolidModel, TemplateRegistry};
use crate::materials::{default_library, MaterialLibrary};
use crate::metrics::{cost, displacement_max, stress_max};
use crate::taskgen::TaskInstance;

/// Probabilities of injected toolchain failures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureConfig {
    #[serde(default)]
    pub p_regen: f64,
    #[serde(default)]
    pub p_mesh: f64,
    #[serde(default)]
    pub p_solver: f64,
}

impl FailureConfig {
    pub const NONE: FailureConfig = FailureConfig {
        p_regen: 0.0,
        p_mesh: 0.0,
        p_solver: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_regen", self.p_regen), ("p_mesh", self.p_mesh), ("p_solver", self.p_solver)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Format(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    /// Parses `p_regen,p_mesh,p_solver`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("failure probabilities `{text}`: {e}")))?;
        let [p_regen, p_mesh, p_solver] = parts[..] else {
            return Err(Error::Format(format!("expected three probabilities, got `{text}`")));
        };
        let f = Self {
            p_regen,
            p_mesh,
            p_solver,
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeState {
    Open,
    Finalized,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServerConfig {
    pub mesh_density: usize,
    /// When set, meshes and result fields are also written below
    /// `<dir>/<episode_id>/`.
    pub artifact_dir: Option<PathBuf>,
    /// Used when `open_episode` arrives without a `failures` object.
    pub default_failures: FailureConfig,
}

impl ServerConfig {
    pub fn with_density(mesh_density: usize) -> Self {
        Self {
            mesh_density,
            artifact_dir: None,
            default_failures: FailureConfig::NONE,
        }
    }
}

struct Geometry {
    solid: SolidModel,
}

struct SimResult {
    u_max: f64,
    sigma_max: f64,
}

/// Server-side state of one episode.
pub struct Episode {
    pub id: String,
    pub task: TaskInstance,
    pub failures: FailureConfig,
    pub state: EpisodeState,
    pub turn_count: usize,
    pub tool_call_count: usize,
    log: RolloutLog,
    rng: ChaCha8Rng,
    geometries: HashMap<String, Geometry>,
    results: HashMap<String, SimResult>,
    handles: usize,
}

impl Episode {
    pub fn log(&self) -> &RolloutLog {
        &self.log
    }

    fn next_handle(&mut self, prefix: &str) -> String {
        self.handles += 1;
        format!("{prefix}-{}", self.handles)
    }

    fn exhaust(&mut self, reason: ErrorCode) {
        if self.state == EpisodeState::Open {
            self.state = EpisodeState::BudgetExhausted;
            self.log.push(
                EventKind::Terminal,
                None,
                json!({ "reason": reason.as_str(), "tool_calls": self.tool_call_count, "rounds": self.turn_count }),
                false,
            );
        }
    }
}

type ToolResult = std::result::Result<Value, (ErrorCode, String)>;

fn malformed(msg: impl Into<String>) -> (ErrorCode, String) {
    (ErrorCode::MalformedArgs, msg.into())
}

fn str_arg<'a>(args: &'a Value, key: &str) -> std::result::Result<&'a str, (ErrorCode, String)> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(format!("`{key}` must be a string; got args {args}")))
}

/// Serves any number of concurrent episodes. Each episode is locked for the
/// duration of a call, so calls within one episode run in arrival order.
pub struct ToolServer {
    registry: TemplateRegistry,
    library: MaterialLibrary,
    config: ServerConfig,
    episodes: Mutex<HashMap<String, Arc<Mutex<Episode>>>>,
    next_episode: AtomicU64,
}

impl ToolServer {
    pub fn new(config: ServerConfig) -> Self {
        Self::with_parts(default_registry().clone(), default_library().clone(), config)
    }

    pub fn with_parts(registry: TemplateRegistry, library: MaterialLibrary, config: ServerConfig) -> Self {
        Self {
            registry,
            library,
            config,
            episodes: Mutex::new(HashMap::new()),
            next_episode: AtomicU64::new(1),
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }

    pub fn library(&self) -> &MaterialLibrary {
        &self.library
    }

    pub fn open_episode(&self, task: TaskInstance, failures: FailureConfig) -> Result<String> {
        task.validate(&self.registry, &self.library)?;
        failures.validate()?;
        let id = format!("ep-{}", self.next_episode.fetch_add(1, Ordering::Relaxed));
        let rng = ChaCha8Rng::seed_from_u64(task.seed);
        let episode = Episode {
            id: id.clone(),
            task,
            failures,
            state: EpisodeState::Open,
            turn_count: 0,
            tool_call_count: 0,
            log: RolloutLog::default(),
            rng,
            geometries: HashMap::new(),
            results: HashMap::new(),
            handles: 0,
        };
        self.episodes
            .lock()
            .expect("episode table poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(episode)));
        Ok(id)
    }

    fn episode(&self, id: &str) -> Option<Arc<Mutex<Episode>>> {
        self.episodes.lock().expect("episode table poisoned").get(id).cloned()
    }

    /// Runs `f` on the locked episode, or reports an unknown id.
    pub fn with_episode<T>(&self, id: &str, f: impl FnOnce(&mut Episode) -> T) -> Option<T> {
        let ep = self.episode(id)?;
        let mut guard = ep.lock().expect("episode poisoned");
        Some(f(&mut guard))
    }

    pub fn rollout_log(&self, id: &str) -> Option<RolloutLog> {
        self.with_episode(id, |e| e.log.clone())
    }

    pub fn state(&self, id: &str) -> Option<EpisodeState> {
        self.with_episode(id, |e| e.state)
    }

    /// Drops an episode and its artifacts, returning the final log.
    pub fn close_episode(&self, id: &str) -> Option<RolloutLog> {
        let ep = self.episodes.lock().expect("episode table poisoned").remove(id)?;
        let log = ep.lock().expect("episode poisoned").log.clone();
        Some(log)
    }

    /// Executes one tool call against an episode.
    pub fn call_tool(&self, episode_id: &str, call_id: Value, tool: &str, args: Value) -> Response {
        let Some(ep) = self.episode(episode_id) else {
            return Response::err(call_id, ErrorCode::UnknownEpisode, format!("no episode `{episode_id}`"));
        };
        let mut ep = ep.lock().expect("episode poisoned");
        match ep.state {
            EpisodeState::Finalized => {
                return Response::err(call_id, ErrorCode::EpisodeClosed, "episode already finalized");
            }
            EpisodeState::BudgetExhausted => {
                return Response::err(call_id, ErrorCode::BudgetExhausted, "episode budget exhausted");
            }
            EpisodeState::Open => {}
        }
        if ep.tool_call_count >= ep.task.max_tool_calls {
            ep.exhaust(ErrorCode::BudgetExhausted);
            return Response::err(
                call_id,
                ErrorCode::BudgetExhausted,
                format!("tool-call budget of {} exhausted", ep.task.max_tool_calls),
            );
        }
        ep.tool_call_count += 1;
        ep.log.push(
            EventKind::ToolCall,
            Some(tool),
            json!({ "call_id": call_id, "args": args }),
            true,
        );
        let outcome = match tool {
            "generate_cad" => self.generate_cad(&mut ep, &args),
            "run_cae" => self.run_cae(&mut ep, &args),
            "extract_results" => extract_results(&ep, &args),
            "compute_cost" => self.compute_cost(&ep, &args),
            other => Err((
                ErrorCode::UnknownTool,
                format!("unknown tool `{other}`; available: {}", TOOLS.join(", ")),
            )),
        };
        let response = match outcome {
            Ok(payload) => Response::ok(call_id, payload),
            Err((code, message)) => Response::err(call_id, code, message),
        };
        ep.log.push(EventKind::ToolResponse, Some(tool), response.to_value(), response.success);
        response
    }

    fn generate_cad(&self, ep: &mut Episode, args: &Value) -> ToolResult {
        let category_id = str_arg(args, "category")?;
        if category_id != ep.task.category {
            return Err(malformed(format!(
                "this episode designs `{}`, not `{category_id}`",
                ep.task.category
            )));
        }
        let params: ParamMap = args
            .get("params")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| malformed(format!("`params` must map parameter names to numbers; got args {args}")))?;
        let category = self.registry.get(category_id).map_err(|e| malformed(e.to_string()))?;
        let vector = category
            .params_from_map(&params)
            .and_then(|v| category.check_params(&v).map(|_| v))
            .map_err(|e| malformed(format!("{e}; expected parameters {:?}", category.params.iter().map(|p| &p.name).collect::<Vec<_>>())))?;
        let fail = ep.rng.gen::<f64>() < ep.failures.p_regen;
        if fail {
            return Err((ErrorCode::RegenFailure, "geometry regeneration failed (injected)".into()));
        }
        let solid = generate_solid(category, &vector, self.config.mesh_density).map_err(|e| match e {
            Error::MeshingFailure(_) => (ErrorCode::MeshFailure, e.to_string()),
            _ => (ErrorCode::RegenFailure, e.to_string()),
        })?;
        let id = ep.next_handle("geom");
        if let Some(dir) = &self.config.artifact_dir {
            let dir = dir.join(&ep.id);
            std::fs::create_dir_all(&dir)
                .and_then(|_| crate::geometry::meshfile::save(&solid, dir.join(format!("{id}.mesh"))).map_err(std::io::Error::other))
                .map_err(|e| (ErrorCode::RegenFailure, format!("writing geometry: {e}")))?;
        }
        let anchors: Vec<Value> = solid
            .anchors
            .iter()
            .map(|a| json!({ "role": a.role.as_str(), "position": a.position }))
            .collect();
        let payload = json!({
            "geometry_id": id,
            "category": category_id,
            "anchors": anchors,
            "volume_mm3": solid.volume_mm3,
        });
        ep.geometries.insert(id, Geometry { solid });
        Ok(payload)
    }

    fn run_cae(&self, ep: &mut Episode, args: &Value) -> ToolResult {
        let geometry_id = str_arg(args, "geometry_id")?;
        let material_name = str_arg(args, "material")?;
        let material = self
            .library
            .lookup(material_name)
            .map_err(|_| malformed(format!("unknown material `{material_name}`; choose one of {:?}", self.library.list_materials())))?;
        if !ep.geometries.contains_key(geometry_id) {
            return Err(malformed(format!("no geometry `{geometry_id}` in this episode")));
        }
        let mesh_roll = ep.rng.gen::<f64>();
        let solver_roll = ep.rng.gen::<f64>();
        if mesh_roll < ep.failures.p_mesh {
            return Err((ErrorCode::MeshFailure, "mesh generation failed (injected)".into()));
        }
        if solver_roll < ep.failures.p_solver {
            return Err((ErrorCode::SolverFailure, "solver did not converge (injected)".into()));
        }
        let solid = &ep.geometries[geometry_id].solid;
        let field = solve_static(solid, material, &ep.task.sim_settings(), default_epsilon(solid)).map_err(|e| match e {
            Error::NoFaceMatched(_) | Error::MeshingFailure(_) => (ErrorCode::MeshFailure, e.to_string()),
            _ => (ErrorCode::SolverFailure, e.to_string()),
        })?;
        let sim = SimResult {
            u_max: displacement_max(&field).map_err(|e| (ErrorCode::SolverFailure, e.to_string()))?,
            sigma_max: stress_max(&field).map_err(|e| (ErrorCode::SolverFailure, e.to_string()))?,
        };
        let id = ep.next_handle("res");
        if let Some(dir) = &self.config.artifact_dir {
            let path = dir.join(&ep.id).join(format!("{id}.result"));
            crate::fem::resultfile::save(&field, path)
                .map_err(|e| (ErrorCode::SolverFailure, format!("writing result: {e}")))?;
        }
        let payload = json!({ "result_id": id, "log": field.solver_log });
        ep.results.insert(id, sim);
        Ok(payload)
    }

    fn compute_cost(&self, ep: &Episode, args: &Value) -> ToolResult {
        let geometry_id = str_arg(args, "geometry_id")?;
        let material_name = str_arg(args, "material")?;
        let material = self
            .library
            .lookup(material_name)
            .map_err(|_| malformed(format!("unknown material `{material_name}`")))?;
        let g = ep
            .geometries
            .get(geometry_id)
            .ok_or_else(|| malformed(format!("no geometry `{geometry_id}` in this episode")))?;
        Ok(json!({ "cost": cost(g.solid.volume_mm3, material) }))
    }

    /// Records one agent turn. Fails once the round budget is spent.
    pub fn policy_message(&self, episode_id: &str, call_id: Value, text: &str) -> Response {
        let out = self.with_episode(episode_id, |ep| {
            if ep.state != EpisodeState::Open {
                let code = match ep.state {
                    EpisodeState::Finalized => ErrorCode::EpisodeClosed,
                    _ => ErrorCode::BudgetExhausted,
                };
                return Response::err(call_id.clone(), code, "episode is not open");
            }
            if ep.turn_count >= ep.task.max_rounds {
                ep.exhaust(ErrorCode::RoundLimit);
                return Response::err(
                    call_id.clone(),
                    ErrorCode::RoundLimit,
                    format!("round budget of {} exhausted", ep.task.max_rounds),
                );
            }
            ep.turn_count += 1;
            ep.log.push(EventKind::PolicyMessage, None, json!({ "text": text }), true);
            Response::ok(call_id.clone(), json!({ "round": ep.turn_count }))
        });
        out.unwrap_or_else(|| Response::err(call_id, ErrorCode::UnknownEpisode, format!("no episode `{episode_id}`")))
    }

    /// Records the final answer. An open episode becomes finalized; an
    /// exhausted one keeps its state but still records the answer once.
    pub fn submit_final(&self, episode_id: &str, call_id: Value, text: &str) -> Response {
        let out = self.with_episode(episode_id, |ep| {
            let already = ep.log.events.iter().any(|e| e.kind == EventKind::FinalOutput);
            if ep.state == EpisodeState::Finalized || already {
                return Response::err(call_id.clone(), ErrorCode::EpisodeClosed, "final output already submitted");
            }
            let parsed = parse_final(text);
            let ok = parsed.is_some();
            ep.log.push(
                EventKind::FinalOutput,
                None,
                json!({ "text": text, "parsed": parsed }),
                ok,
            );
            if ep.state == EpisodeState::Open {
                ep.state = EpisodeState::Finalized;
            }
            Response::ok(call_id.clone(), json!({ "parsed": ok }))
        });
        out.unwrap_or_else(|| Response::err(call_id, ErrorCode::UnknownEpisode, format!("no episode `{episode_id}`")))
    }

    /// Dispatches one wire request.
    pub fn handle(&self, req: Request) -> Response {
        let Request {
            episode_id,
            call_id,
            tool,
            args,
        } = req;
        if tool == "describe" {
            let descriptor: Value = serde_json::from_str(DESCRIPTOR).expect("bundled descriptor is valid JSON");
            return Response::ok(call_id, descriptor);
        }
        if tool == "open_episode" {
            let task = args.get("task").cloned().map(serde_json::from_value::<TaskInstance>);
            let failures = match args.get("failures") {
                None | Some(Value::Null) => Ok(self.config.default_failures),
                Some(v) => serde_json::from_value::<FailureConfig>(v.clone()),
            };
            return match (task, failures) {
                (Some(Ok(task)), Ok(failures)) => {
                    let limits = json!({ "max_rounds": task.max_rounds, "max_tool_calls": task.max_tool_calls });
                    match self.open_episode(task, failures) {
                        Ok(id) => Response::ok(
                            call_id,
                            json!({ "episode_id": id, "max_rounds": limits["max_rounds"], "max_tool_calls": limits["max_tool_calls"] }),
                        ),
                        Err(e) => Response::err(call_id, ErrorCode::MalformedArgs, e.to_string()),
                    }
                }
                (Some(Err(e)), _) => Response::err(call_id, ErrorCode::MalformedArgs, format!("task: {e}")),
                (None, _) => Response::err(call_id, ErrorCode::MalformedArgs, "`task` is required"),
                (_, Err(e)) => Response::err(call_id, ErrorCode::MalformedArgs, format!("failures: {e}")),
            };
        }
        let Some(episode_id) = episode_id else {
            return Response::err(call_id, ErrorCode::InvalidRequest, format!("`{tool}` needs an episode_id"));
        };
        let text = || args.get("text").and_then(Value::as_str).map(str::to_string);
        match tool.as_str() {
            "policy_message" => match text() {
                Some(t) => self.policy_message(&episode_id, call_id, &t),
                None => Response::err(call_id, ErrorCode::MalformedArgs, "`text` must be a string"),
            },
            "submit_final" => match text() {
                Some(t) => self.submit_final(&episode_id, call_id, &t),
                None => Response::err(call_id, ErrorCode::MalformedArgs, "`text` must be a string"),
            },
            "get_rollout_log" | "close_episode" => {
                let snapshot = if tool == "close_episode" {
                    let state = self.state(&episode_id);
                    self.close_episode(&episode_id).zip(state)
                } else {
                    self.with_episode(&episode_id, |e| (e.log.clone(), e.state))
                };
                match snapshot {
                    Some((log, state)) => Response::ok(call_id, json!({ "events": log.events, "state": state })),
                    None => Response::err(call_id, ErrorCode::UnknownEpisode, format!("no episode `{episode_id}`")),
                }
            }
            _ => self.call_tool(&episode_id, call_id, &tool, args),
        }
    }
}

fn extract_results(ep: &Episode, args: &Value) -> ToolResult {
    let result_id = str_arg(args, "result_id")?;
    let r = ep
        .results
        .get(result_id)
        .ok_or_else(|| malformed(format!("no result `{result_id}` in this episode")))?;
    Ok(json!({ "u_max": r.u_max, "sigma_max": r.sigma_max }))
}
