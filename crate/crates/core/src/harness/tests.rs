use serde_json::json;

use super::*;
use crate::geometry::{default_registry, ParamVector};
use crate::materials::default_library;
use crate::reward::parse_triples;
use crate::taskgen::{DEFAULT_MAX_ROUNDS, DEFAULT_MAX_TOOL_CALLS};
use crate::toolserver::EventKind;

const DENSITY: usize = 2;
const STEEL: &str = "Carbon Steel - ASTM A105";

fn task(delta_scale: f64, seed: u64) -> TaskInstance {
    let cat = default_registry().get("flat_plate").unwrap();
    let params: ParamVector = vec![100.0, 50.0, 6.0 + seed as f64].into();
    let m = default_library().lookup(STEEL).unwrap();
    let mut t = TaskInstance {
        category: "flat_plate".into(),
        initial_params: cat.params_to_map(&params),
        initial_material: STEEL.into(),
        pressure_mpa: 0.3,
        delta_mm: 1.0,
        kappa: 1.0,
        stress_scale: 1.0,
        max_rounds: DEFAULT_MAX_ROUNDS,
        max_tool_calls: DEFAULT_MAX_TOOL_CALLS,
        seed,
    };
    let base = evaluate_design(cat, &params, m, &t.sim_settings(), DENSITY).unwrap();
    assert!(base.sigma_max <= m.allowable_stress);
    t.delta_mm = base.u_max * delta_scale;
    t.kappa = base.cost;
    t
}

fn tasks(n: u64, delta_scale: f64) -> Vec<(String, TaskInstance)> {
    (0..n).map(|i| (format!("test/test_{i:05}"), task(delta_scale, i))).collect()
}

fn run(tasks: &[(String, TaskInstance)], policy: &str) -> Vec<(String, RolloutLog)> {
    let server = server_for(DENSITY);
    run_episodes(tasks, policy, &server, FailureConfig::NONE)
        .unwrap()
        .into_iter()
        .map(|(id, o)| (id, o.log))
        .collect()
}

fn eval(tasks: &[(String, TaskInstance)], logs: &[(String, RolloutLog)]) -> EvalReport {
    evaluate_run(tasks, logs, default_registry(), default_library(), DENSITY).unwrap()
}

#[test]
fn feasible_consistent_runs_score_one_everywhere() {
    let ts = tasks(3, 1.0);
    let report = eval(&ts, &run(&ts, "heuristic"));
    for v in [report.FSR, report.DSR, report.SSR, report.CSR, report.MEO] {
        assert_eq!(v, 1.0);
    }
    assert_eq!(report.AS, 1.1);
    assert_eq!(report.ATC, 4.0);
    report.check_invariants().unwrap();
}

#[test]
fn missing_final_outputs_fail_everything() {
    let ts = tasks(2, 1.0);
    let logs: Vec<(String, RolloutLog)> = run(&ts, "heuristic")
        .into_iter()
        .map(|(id, mut l)| {
            l.events.retain(|e| e.kind != EventKind::FinalOutput);
            (id, l)
        })
        .collect();
    let report = eval(&ts, &logs);
    assert_eq!((report.MEO, report.FSR, report.DSR), (0.0, 0.0, 0.0));
    assert!(report.instances.iter().all(|r| r.reverified.is_none() && r.failure.is_some()));
}

#[test]
fn average_tool_calls_counts_call_events() {
    let ts = tasks(1, 1.0);
    let mut log = RolloutLog::default();
    for i in 0..7 {
        log.push(EventKind::ToolCall, Some("describe"), json!({"call_id": i, "args": {}}), true);
        log.push(EventKind::ToolResponse, Some("describe"), json!({"call_id": i, "success": true}), true);
    }
    let report = eval(&ts, &[(ts[0].0.clone(), log)]);
    assert_eq!(report.ATC, 7.0);
    assert_eq!(report.AS, 0.0);
}

#[test]
fn reproduction_matches_the_last_logged_triple() {
    let ts = tasks(1, 0.7);
    let logs = run(&ts, "heuristic");
    let last = parse_triples(&logs[0].1).pop().unwrap();
    let design = parse_final(logs[0].1.final_text().unwrap()).unwrap();
    let t = reproduce_final(&design, &ts[0].1, default_registry(), default_library(), DENSITY).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    assert!(close(t.u_max, last.triple.u_max) && close(t.sigma_max, last.triple.sigma_max) && close(t.cost, last.triple.cost));
}

#[test]
fn out_of_bounds_final_is_a_failure() {
    let (_, t) = &tasks(1, 1.0)[0];
    let mut d = FinalDesign::new("flat_plate", &t.initial_design());
    d.parameters["thickness"] = 500.0;
    assert!(reproduce_final(&d, t, default_registry(), default_library(), DENSITY).is_err());
    let mut log = RolloutLog::default();
    log.push(EventKind::FinalOutput, None, json!({ "text": d.to_json() }), true);
    let r = evaluate_instance("x", t, "x.ndjson", &log, default_registry(), default_library(), DENSITY);
    assert!(r.final_design.is_some() && r.reverified.is_none() && !r.feasible());
    let mut other = d.clone();
    other.category = "bushing".into();
    assert!(reproduce_final(&other, t, default_registry(), default_library(), DENSITY).is_err());
}

#[test]
fn mismatched_sets_are_rejected() {
    let ts = tasks(2, 1.0);
    let logs = run(&ts[..1], "submit_initial");
    let err = evaluate_run(&ts, &logs, default_registry(), default_library(), DENSITY).unwrap_err();
    assert!(matches!(err, Error::MismatchedSets(_)));
    let renamed = vec![("other".to_string(), logs[0].1.clone())];
    assert!(evaluate_run(&ts[..1], &renamed, default_registry(), default_library(), DENSITY).is_err());
}

#[test]
fn logs_round_trip_through_a_directory_and_reports_are_deterministic() {
    let ts = tasks(2, 0.8);
    let logs = run(&ts, "heuristic");
    let dir = tempfile::tempdir().unwrap();
    save_logs(dir.path(), logs.iter().map(|(id, l)| (id.as_str(), l))).unwrap();
    let loaded = load_logs(dir.path()).unwrap();
    assert_eq!(loaded, logs);
    let a = eval(&ts, &loaded);
    let b = eval(&ts, &logs);
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.table().contains("FSR"));
}

#[test]
fn unknown_policy_is_an_error() {
    assert!(run_episodes(&tasks(1, 1.0), "oracle", &server_for(1), FailureConfig::NONE).is_err());
}
