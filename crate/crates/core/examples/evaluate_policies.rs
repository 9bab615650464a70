//! Generates a small test set, runs every scripted policy on it with and
//! without failure injection, and prints the evaluation metrics side by side.
//!
//! cargo run --release --example evaluate_policies -- [n_tasks] [mesh_density]

use cadloop::geometry::default_registry;
use cadloop::harness::{evaluate_run, run_episodes, server_for};
use cadloop::materials::default_library;
use cadloop::policies::POLICY_NAMES;
use cadloop::taskgen::{generate_dataset, DatasetSizes, GeneratorConfig, TaskGenerator};
use cadloop::toolserver::FailureConfig;

fn main() -> cadloop::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    let density: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let config = GeneratorConfig {
        mesh_density: density,
        ..GeneratorConfig::default()
    };
    let mut generator = TaskGenerator::new(default_registry().clone(), default_library().clone(), config);
    let sizes = DatasetSizes { train: 0, test: n, general: 0 };
    let manifest = generate_dataset(&mut generator, sizes, 2024)?;
    let tasks: Vec<_> = manifest
        .tasks
        .iter()
        .map(|e| (e.file.trim_end_matches(".json").to_string(), e.generated.task.clone()))
        .collect();

    let server = server_for(density);
    println!(
        "{:<16} {:<9} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>6}",
        "policy", "failures", "FSR", "DSR", "SSR", "CSR", "MEO", "AS", "ATC"
    );
    for failures in [FailureConfig::NONE, FailureConfig::parse("0.05,0.05,0.05")?] {
        for policy in POLICY_NAMES {
            let outcomes = run_episodes(&tasks, policy, &server, failures)?;
            let logs: Vec<_> = outcomes.into_iter().map(|(id, o)| (id, o.log)).collect();
            let r = evaluate_run(&tasks, &logs, default_registry(), default_library(), density)?;
            println!(
                "{:<16} {:<9} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>7.4} {:>6.2}",
                policy,
                if failures == FailureConfig::NONE { "off" } else { "5% each" },
                r.FSR,
                r.DSR,
                r.SSR,
                r.CSR,
                r.MEO,
                r.AS,
                r.ATC
            );
        }
    }
    Ok(())
}
