//! Scores a rollout log against its task file, or a built-in demo episode
//! when no paths are given.
//!
//! cargo run --release --example score_rollout -- [log.ndjson task.json]

use cadloop::materials::default_library;
use cadloop::reward::{parse_triples, score};
use cadloop::taskgen::TaskInstance;
use cadloop::toolserver::RolloutLog;

fn main() -> cadloop::Result<()> {
    let mut args = std::env::args().skip(1);
    let (log, task) = match (args.next(), args.next()) {
        (Some(l), Some(t)) => (RolloutLog::load(l)?, TaskInstance::load(t)?),
        _ => demo()?,
    };
    for r in parse_triples(&log) {
        println!(
            "t={:<3} {:<28} u={:.4} mm  sigma={:.3} MPa  cost={:.4}",
            r.t_index, r.design.material, r.triple.u_max, r.triple.sigma_max, r.triple.cost
        );
    }
    println!("{}", serde_json::to_string_pretty(&score(&log, &task, default_library())).expect("serializable"));
    Ok(())
}

fn demo() -> cadloop::Result<(RolloutLog, TaskInstance)> {
    use cadloop::policies::{run_policy, SubmitInitial};
    use cadloop::toolserver::{FailureConfig, ServerConfig, ToolServer};
    let task = TaskInstance::from_json(
        r#"{"category": "flat_plate",
            "initial_params": {"length": 100.0, "width": 50.0, "thickness": 6.0},
            "initial_material": "Carbon Steel - ASTM A105",
            "pressure_mpa": 0.2, "delta_mm": 1.0, "kappa": 10.0, "stress_scale": 1.0,
            "max_rounds": 15, "max_tool_calls": 60, "seed": 1}"#,
    )?;
    let server = ToolServer::new(ServerConfig::with_density(2));
    let mut client = &server;
    let o = run_policy(&mut SubmitInitial, &task, &mut client, FailureConfig::NONE, server.registry(), server.library())?;
    Ok((o.log, task))
}
