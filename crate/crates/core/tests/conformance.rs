//! Golden transcripts of the tool protocol, replayed against the embedded
//! server both in process and over the wire. Set UPDATE_TRANSCRIPTS=1 to
//! regenerate them from the scripted requests below.

use std::io::BufReader;
use std::path::PathBuf;

use serde_json::{json, Value};

use cadloop::policies::{ToolClient, WireClient};
use cadloop::toolserver::conformance::{descriptor, read_transcript, run_transcript, write_transcript, TranscriptEntry};
use cadloop::toolserver::{serve_lines, Request, ServerConfig, ToolServer};

const DENSITY: usize = 1;
const STEEL: &str = "Carbon Steel - ASTM A105";

fn task(max_rounds: usize, max_tool_calls: usize) -> Value {
    json!({
        "category": "flat_plate",
        "initial_params": {"length": 100.0, "width": 50.0, "thickness": 6.0},
        "initial_material": STEEL,
        "pressure_mpa": 0.2,
        "delta_mm": 1.0,
        "kappa": 10.0,
        "stress_scale": 1.0,
        "max_rounds": max_rounds,
        "max_tool_calls": max_tool_calls,
        "seed": 7
    })
}

fn plate() -> Value {
    json!({"category": "flat_plate", "params": {"length": 100.0, "width": 50.0, "thickness": 6.0}})
}

struct Script(Vec<Request>);

impl Script {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn req(mut self, ep: Option<&str>, tool: &str, args: Value) -> Self {
        let id = self.0.len() as u64 + 1;
        self.0.push(Request::new(ep, id, tool, args));
        self
    }

    fn open(self, task: Value, failures: Option<Value>) -> Self {
        let mut args = json!({ "task": task });
        if let Some(f) = failures {
            args["failures"] = f;
        }
        self.req(None, "open_episode", args)
    }
}

fn iteration() -> Script {
    let ep = Some("ep-1");
    Script::new()
        .req(None, "describe", json!({}))
        .open(task(15, 60), None)
        .req(ep, "policy_message", json!({"text": "round 1"}))
        .req(ep, "generate_cad", plate())
        .req(ep, "run_cae", json!({"geometry_id": "geom-1", "material": STEEL}))
        .req(ep, "extract_results", json!({"result_id": "res-2"}))
        .req(ep, "compute_cost", json!({"geometry_id": "geom-1", "material": STEEL}))
        .req(
            ep,
            "submit_final",
            json!({"text": format!("{{\"category\": \"flat_plate\", \"material\": \"{STEEL}\", \"parameters\": {{\"length\": 100.0, \"width\": 50.0, \"thickness\": 6.0}}}}")}),
        )
        .req(ep, "generate_cad", plate())
        .req(ep, "get_rollout_log", json!({}))
        .req(ep, "close_episode", json!({}))
        .req(ep, "get_rollout_log", json!({}))
}

fn errors() -> Script {
    let ep = Some("ep-1");
    Script::new()
        .open(task(15, 60), None)
        .req(ep, "fly_to_moon", json!({}))
        .req(ep, "generate_cad", json!({"category": "flat_plate", "params": {"length": 100.0}}))
        .req(ep, "generate_cad", json!({"category": "flat_plate", "params": {"length": 100.0, "width": 50.0, "thickness": 999.0}}))
        .req(ep, "generate_cad", json!({"category": "bushing", "params": {}}))
        .req(ep, "run_cae", json!({"geometry_id": "geom-404", "material": STEEL}))
        .req(ep, "generate_cad", plate())
        .req(ep, "run_cae", json!({"geometry_id": "geom-1", "material": "Unobtainium"}))
        .req(ep, "extract_results", json!({"result_id": 5}))
        .req(Some("ep-999"), "generate_cad", plate())
        .req(None, "generate_cad", plate())
        .req(None, "open_episode", json!({"task": {"category": "flat_plate"}}))
        .req(ep, "policy_message", json!({}))
}

fn budgets() -> Script {
    let (a, b) = (Some("ep-1"), Some("ep-2"));
    Script::new()
        .open(task(15, 2), None)
        .req(a, "generate_cad", plate())
        .req(a, "compute_cost", json!({"geometry_id": "geom-1", "material": STEEL}))
        .req(a, "generate_cad", plate())
        .req(a, "generate_cad", plate())
        .req(a, "submit_final", json!({"text": "no design"}))
        .req(a, "submit_final", json!({"text": "again"}))
        .open(task(1, 60), None)
        .req(b, "policy_message", json!({"text": "first"}))
        .req(b, "policy_message", json!({"text": "second"}))
        .req(b, "generate_cad", plate())
        .req(b, "get_rollout_log", json!({}))
}

fn failures() -> Script {
    Script::new()
        .open(task(15, 60), Some(json!({"p_regen": 1.0, "p_mesh": 0.0, "p_solver": 0.0})))
        .req(Some("ep-1"), "generate_cad", plate())
        .open(task(15, 60), Some(json!({"p_regen": 0.0, "p_mesh": 1.0, "p_solver": 0.0})))
        .req(Some("ep-2"), "generate_cad", plate())
        .req(Some("ep-2"), "run_cae", json!({"geometry_id": "geom-1", "material": STEEL}))
        .open(task(15, 60), Some(json!({"p_regen": 0.0, "p_mesh": 0.0, "p_solver": 1.0})))
        .req(Some("ep-3"), "generate_cad", plate())
        .req(Some("ep-3"), "run_cae", json!({"geometry_id": "geom-1", "material": STEEL}))
        .req(Some("ep-3"), "extract_results", json!({"result_id": "res-2"}))
        .open(task(15, 60), Some(json!({"p_regen": 2.0})))
}

fn scripts() -> Vec<(&'static str, Script)> {
    vec![
        ("iteration", iteration()),
        ("errors", errors()),
        ("budgets", budgets()),
        ("failures", failures()),
    ]
}

fn transcript_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/transcripts")
}

fn server() -> ToolServer {
    ToolServer::new(ServerConfig::with_density(DENSITY))
}

fn load(name: &str, script: &Script) -> Vec<TranscriptEntry> {
    let path = transcript_dir().join(format!("{name}.ndjson"));
    if std::env::var_os("UPDATE_TRANSCRIPTS").is_some() || !path.exists() {
        let s = server();
        let entries: Vec<TranscriptEntry> = script
            .0
            .iter()
            .map(|r| TranscriptEntry {
                request: r.clone(),
                response: s.handle(r.clone()).to_value(),
            })
            .collect();
        std::fs::create_dir_all(transcript_dir()).unwrap();
        std::fs::write(&path, write_transcript(&entries)).unwrap();
    }
    read_transcript(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

#[test]
fn transcripts_replay_in_process_exactly() {
    for (name, script) in scripts() {
        let entries = load(name, &script);
        assert_eq!(entries.len(), script.0.len(), "{name}: stale transcript");
        let s = server();
        let problems = run_transcript(&entries, Some(1e-12), |r| s.handle(r));
        assert!(problems.is_empty(), "{name}: {problems:#?}");
    }
}

#[cfg(unix)]
#[test]
fn transcripts_replay_over_the_wire() {
    use std::os::unix::net::UnixStream;
    for (name, script) in scripts() {
        let entries = load(name, &script);
        let (a, b) = UnixStream::pair().unwrap();
        let worker = std::thread::spawn(move || {
            let s = server();
            serve_lines(&s, BufReader::new(a.try_clone().unwrap()), a).unwrap();
        });
        let mut client = WireClient::new(BufReader::new(b.try_clone().unwrap()), b);
        let problems = run_transcript(&entries, None, |r| client.request(r).unwrap());
        drop(client);
        worker.join().unwrap();
        assert!(problems.is_empty(), "{name}: {problems:#?}");
    }
}

#[test]
fn transcripts_cover_every_tool_and_error_code() {
    let d = descriptor();
    let mut tools = std::collections::BTreeSet::new();
    let mut codes = std::collections::BTreeSet::new();
    for (name, script) in scripts() {
        for e in load(name, &script) {
            tools.insert(e.request.tool.clone());
            if let Some(c) = e.response.pointer("/error/code").and_then(Value::as_str) {
                codes.insert(c.to_string());
            }
            if e.response["success"] == true {
                d.validate_request(&e.request).unwrap();
            }
            d.validate_response(&e.request.tool, &e.response).unwrap();
        }
    }
    for t in &d.tools {
        assert!(tools.contains(&t.name), "no transcript uses {}", t.name);
    }
    for c in &d.error_codes {
        assert!(codes.contains(c), "no transcript produces {c}");
    }
}

#[test]
fn replay_detects_a_diverging_server() {
    let entries = load("iteration", &iteration());
    let s = ToolServer::new(ServerConfig::with_density(DENSITY));
    let problems = run_transcript(&entries, Some(1e-12), |mut r| {
        if r.tool == "compute_cost" {
            r.args["material"] = json!("Gray Cast Iron");
        }
        s.handle(r)
    });
    assert!(!problems.is_empty());
}
