//! Runs one scripted policy on a freshly generated task against an embedded
//! server, then prints the transcript summary and the reward.
//!
//! cargo run --release --example run_policy -- [policy] [seed]

use cadloop::geometry::{default_registry, Split};
use cadloop::materials::default_library;
use cadloop::policies::{policy_by_name, run_policy};
use cadloop::reward::score;
use cadloop::taskgen::{GeneratorConfig, TaskGenerator};
use cadloop::toolserver::{EventKind, FailureConfig, ServerConfig, ToolServer};

fn main() -> cadloop::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "heuristic".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let density = 2;
    let config = GeneratorConfig {
        mesh_density: density,
        ..GeneratorConfig::default()
    };
    let mut generator = TaskGenerator::new(default_registry().clone(), default_library().clone(), config);
    let categories: Vec<_> = default_registry().split(Split::Main).collect();
    let task = generator.generate(&categories, seed, 0)?.task;
    println!("task: {} with {}", task.category, task.initial_material);

    let server = ToolServer::new(ServerConfig::with_density(density));
    let mut policy = policy_by_name(&name, seed).expect("known policy name");
    let mut client = &server;
    let outcome = run_policy(policy.as_mut(), &task, &mut client, FailureConfig::NONE, server.registry(), server.library())?;

    for e in outcome.log.events.iter().filter(|e| e.kind == EventKind::ToolResponse) {
        let tool = e.tool.as_deref().unwrap_or("-");
        println!("{:>3} {:<16} {}", e.t, tool, if e.success { "ok" } else { "failed" });
    }
    let s = score(&outcome.log, &task, default_library());
    println!("rounds {}  tool calls {}", outcome.rounds, outcome.log.tool_calls());
    println!("submitted: {}", outcome.submitted.to_json());
    println!("R_cons {}  R_stop {}  R_fmt {}  R {}", s.R_cons, s.R_stop, s.R_fmt, s.R);
    Ok(())
}
