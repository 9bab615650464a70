use proptest::prelude::*;
use serde_json::{json, Value};

use super::*;
use crate::design::FinalDesign;
use crate::materials::default_library;

const STEEL: &str = "Carbon Steel - ASTM A105";

fn task() -> TaskInstance {
    TaskInstance {
        category: "flat_plate".into(),
        initial_params: plate(6.0),
        initial_material: STEEL.into(),
        pressure_mpa: 0.2,
        delta_mm: 1.0,
        kappa: 10.0,
        stress_scale: 1.0,
        max_rounds: 15,
        max_tool_calls: 60,
        seed: 1,
    }
}

fn plate(thickness: f64) -> ParamMap {
    ParamMap::from([
        ("length".to_string(), 100.0),
        ("width".to_string(), 50.0),
        ("thickness".to_string(), thickness),
    ])
}

/// Hand-built logs in the server's event format.
#[derive(Default)]
struct Builder {
    log: RolloutLog,
    calls: u64,
}

impl Builder {
    fn exchange(&mut self, tool: &str, args: Value, result: Result<Value, &str>) -> &mut Self {
        self.calls += 1;
        let id = json!(self.calls);
        self.log.push(
            EventKind::ToolCall,
            Some(tool),
            json!({"call_id": id, "args": args}),
            true,
        );
        let (payload, ok) = match result {
            Ok(p) => (json!({"call_id": id, "success": true, "payload": p}), true),
            Err(code) => (
                json!({"call_id": id, "success": false, "error": {"code": code, "message": "x"}}),
                false,
            ),
        };
        self.log.push(EventKind::ToolResponse, Some(tool), payload, ok);
        self
    }

    fn generate(&mut self, gid: &str, thickness: f64) -> &mut Self {
        let args = json!({"category": "flat_plate", "params": plate(thickness)});
        self.exchange("generate_cad", args, Ok(json!({"geometry_id": gid})))
    }

    fn cae(&mut self, gid: &str, material: &str, rid: &str) -> &mut Self {
        let args = json!({"geometry_id": gid, "material": material});
        self.exchange("run_cae", args, Ok(json!({"result_id": rid, "log": ""})))
    }

    fn extract(&mut self, rid: &str, u: f64, s: f64) -> &mut Self {
        self.exchange(
            "extract_results",
            json!({ "result_id": rid }),
            Ok(json!({"u_max": u, "sigma_max": s})),
        )
    }

    fn cost(&mut self, gid: &str, material: &str, c: f64) -> &mut Self {
        let args = json!({"geometry_id": gid, "material": material});
        self.exchange("compute_cost", args, Ok(json!({ "cost": c })))
    }

    /// One full iteration with metrics (u, σ, C).
    fn iteration(&mut self, n: usize, thickness: f64, (u, s, c): (f64, f64, f64)) -> &mut Self {
        let (g, r) = (format!("geom-{n}"), format!("res-{n}"));
        self.generate(&g, thickness).cae(&g, STEEL, &r).extract(&r, u, s).cost(&g, STEEL, c)
    }

    /// `n` tool events (n/2 extra cost queries, plus a lone call if odd).
    fn trailing(&mut self, n: usize, gid: &str) -> &mut Self {
        for _ in 0..n / 2 {
            self.cost(gid, STEEL, 1.0);
        }
        if n % 2 == 1 {
            self.calls += 1;
            let id = json!(self.calls);
            self.log.push(EventKind::ToolCall, Some("describe"), json!({"call_id": id, "args": {}}), true);
        }
        self
    }

    fn final_text(&mut self, text: &str) -> &mut Self {
        self.log.push(EventKind::FinalOutput, None, json!({ "text": text }), true);
        self
    }

    fn final_design(&mut self, thickness: f64) -> &mut Self {
        let d = DesignProposal {
            params: plate(thickness),
            material: STEEL.into(),
        };
        let text = format!("Final design:\n{}", FinalDesign::new("flat_plate", &d).to_json());
        self.final_text(&text)
    }

    fn build(&self) -> RolloutLog {
        self.log.clone()
    }
}

const FEASIBLE: (f64, f64, f64) = (0.5, 100.0, 5.0);
const ONLY_COST: (f64, f64, f64) = (2.0, 500.0, 5.0);
const TWO_OK: (f64, f64, f64) = (2.0, 100.0, 5.0);

fn lib() -> &'static MaterialLibrary {
    default_library()
}

#[test]
fn one_iteration_gives_one_triple_at_the_cost_event() {
    let log = Builder::default().iteration(1, 6.0, FEASIBLE).build();
    let t = parse_triples(&log);
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].t_index, 7);
    assert_eq!(t[0].triple, MetricTriple { u_max: 0.5, sigma_max: 100.0, cost: 5.0 });
    assert_eq!(t[0].design.params, plate(6.0));
    assert_eq!(t[0].design.material, STEEL);
    assert_eq!(t[0].category, "flat_plate");
}

#[test]
fn incomplete_iteration_then_new_geometry_gives_nothing() {
    let mut b = Builder::default();
    b.generate("geom-1", 6.0).cae("geom-1", STEEL, "res-2").extract("res-2", 0.5, 10.0);
    b.generate("geom-3", 7.0).cost("geom-1", STEEL, 5.0);
    assert!(parse_triples(&b.build()).is_empty());
}

#[test]
fn two_iterations_give_ordered_triples() {
    let log = Builder::default().iteration(1, 6.0, ONLY_COST).iteration(2, 8.0, FEASIBLE).build();
    let t = parse_triples(&log);
    assert_eq!(t.len(), 2);
    assert!(t[0].t_index < t[1].t_index);
    assert_eq!(t[1].design.params["thickness"], 8.0);
}

#[test]
fn cost_before_extract_also_completes() {
    let mut b = Builder::default();
    b.generate("g", 6.0).cae("g", STEEL, "r").cost("g", STEEL, 5.0).extract("r", 0.5, 10.0);
    let t = parse_triples(&b.build());
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].t_index, 7);
}

#[test]
fn failed_responses_and_foreign_handles_are_ignored() {
    let mut b = Builder::default();
    b.generate("g1", 6.0).cae("g1", STEEL, "r1");
    b.generate("g2", 7.0)
        .exchange("run_cae", json!({"geometry_id": "g2", "material": STEEL}), Err("solver_failure"))
        .extract("r1", 0.5, 10.0)
        .cost("g2", STEEL, 5.0);
    assert!(parse_triples(&b.build()).is_empty());
    let mut b = Builder::default();
    b.exchange("generate_cad", json!({"category": "flat_plate", "params": plate(6.0)}), Err("regen_failure"))
        .cae("geom-0", STEEL, "r")
        .extract("r", 0.5, 10.0)
        .cost("geom-0", STEEL, 5.0);
    assert!(parse_triples(&b.build()).is_empty());
}

#[test]
fn material_of_cost_must_match_the_analysis() {
    let mut b = Builder::default();
    b.generate("g", 6.0).cae("g", STEEL, "r").extract("r", 0.5, 10.0).cost("g", "Gray Cast Iron", 5.0);
    assert!(parse_triples(&b.build()).is_empty());
}

fn rec(u: f64, s: f64, c: f64, material: &str) -> TripleRecord {
    TripleRecord {
        t_index: 0,
        triple: MetricTriple { u_max: u, sigma_max: s, cost: c },
        category: "flat_plate".into(),
        design: DesignProposal {
            params: plate(6.0),
            material: material.into(),
        },
    }
}

#[test]
fn constraint_counts() {
    let t = task();
    assert_eq!(constraint_count(&rec(0.5, 100.0, 5.0, STEEL), &t, lib()), 3);
    assert_eq!(constraint_count(&rec(2.0, 500.0, 5.0, STEEL), &t, lib()), 1);
    assert_eq!(constraint_count(&rec(1.0, 167.0, 10.0, STEEL), &t, lib()), 3);
    assert_eq!(constraint_count(&rec(0.5, 1.0, 5.0, "Unobtainium"), &t, lib()), 2);
}

#[test]
fn cons_uses_the_last_triple() {
    let t = task();
    let two = Builder::default().iteration(1, 6.0, TWO_OK).build();
    assert_eq!(reward_cons(&two, &t, lib()), 0.50);
    assert_eq!(reward_cons(&RolloutLog::default(), &t, lib()), 0.0);
    let regress = Builder::default().iteration(1, 6.0, FEASIBLE).iteration(2, 4.0, ONLY_COST).build();
    assert_eq!(reward_cons(&regress, &t, lib()), 0.20);
}

#[test]
fn stop_penalty_examples() {
    let t = task();
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).trailing(3, "geom-1");
    assert_eq!(reward_stop(&b.build(), &t, lib()), -0.06);
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).trailing(10, "geom-1");
    assert_eq!(reward_stop(&b.build(), &t, lib()), -0.10);
    let never = Builder::default().iteration(1, 6.0, TWO_OK).trailing(20, "geom-1").build();
    assert_eq!(reward_stop(&never, &t, lib()), 0.0);
}

#[test]
fn stop_penalty_counts_only_tool_traffic() {
    let t = task();
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE);
    b.log.push(EventKind::PolicyMessage, None, json!({"text": "done"}), true);
    b.final_design(6.0);
    let s = score(&b.build(), &t, lib());
    assert_eq!((s.K, s.R_stop), (0, 0.0));
    assert_eq!(s.t_feas, Some(7));
}

#[test]
fn stop_penalty_table() {
    let expected = [0.0, -0.02, -0.04, -0.06, -0.08, -0.10];
    for k in 0..=20 {
        assert_eq!(stop_penalty(k), expected[k.min(5)], "K = {k}");
    }
}

#[test]
fn format_reward_examples() {
    let t = task();
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).final_design(6.0);
    assert_eq!(reward_fmt(&b.build(), &t, lib()), 0.10);
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).final_design(6.5);
    assert_eq!(reward_fmt(&b.build(), &t, lib()), 0.0);
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).final_text("the plate is fine {not json");
    assert_eq!(reward_fmt(&b.build(), &t, lib()), 0.0);
    let mut b = Builder::default();
    b.final_design(6.0);
    assert_eq!(reward_fmt(&b.build(), &t, lib()), 0.0);
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).final_design(6.0 * (1.0 + 5e-7));
    assert_eq!(reward_fmt(&b.build(), &t, lib()), 0.10);
}

#[test]
fn total_reward_examples() {
    let t = task();
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).final_design(6.0);
    assert_eq!(total_reward(&b.build(), &t, lib()), 1.10);
    assert_eq!(total_reward(&RolloutLog::default(), &t, lib()), 0.0);
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).trailing(10, "geom-1").final_design(6.0);
    assert_eq!(total_reward(&b.build(), &t, lib()), 1.00);
}

#[test]
fn score_record_json_fields() {
    let mut b = Builder::default();
    b.iteration(1, 6.0, FEASIBLE).trailing(3, "geom-1").final_design(6.0);
    let s = score(&b.build(), &task(), lib());
    let v = serde_json::to_value(&s).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["R_cons", "R_stop", "R_fmt", "R", "N_last", "t_feas", "K"]);
    assert_eq!(s.N_last, Some(3));
    assert_eq!(s.K, 3);
}

#[test]
fn scoring_a_saved_log_matches() {
    let mut b = Builder::default();
    b.iteration(1, 6.0, TWO_OK).iteration(2, 7.0, FEASIBLE).trailing(4, "geom-2").final_design(7.0);
    let log = b.build();
    let reread = RolloutLog::from_ndjson(&log.to_ndjson()).unwrap();
    assert_eq!(score(&reread, &task(), lib()), score(&log, &task(), lib()));
}

proptest! {
    #[test]
    fn stop_penalty_is_monotone(k in 0usize..200, extra in 0usize..50) {
        prop_assert!(stop_penalty(k + extra) <= stop_penalty(k));
        prop_assert!(stop_penalty(k) >= -0.10 && stop_penalty(k) <= 0.0);
    }

    #[test]
    fn reward_stays_in_range(
        metrics in proptest::collection::vec((0.0f64..3.0, 0.0f64..400.0, 0.0f64..20.0), 0..5),
        trailing in 0usize..15,
        honest in any::<bool>(),
    ) {
        let mut b = Builder::default();
        for (i, m) in metrics.iter().enumerate() {
            b.iteration(i + 1, 6.0 + i as f64, *m);
        }
        let last = metrics.len().max(1);
        b.trailing(trailing, &format!("geom-{last}"));
        b.final_design(if honest { 5.0 + last as f64 } else { 99.0 });
        let s = score(&b.build(), &task(), lib());
        prop_assert!(s.R >= -0.10 && s.R <= 1.10);
        prop_assert_eq!(s.R, s.R_cons + s.R_stop + s.R_fmt);
        prop_assert_eq!(s.R_fmt > 0.0, honest && !metrics.is_empty());
    }
}
