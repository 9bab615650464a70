use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use cadloop::geometry::default_registry;
use cadloop::harness::{
    dataset_density, evaluate_run, load_logs, run_episodes, save_logs, server_for, EvalReport,
};
use cadloop::materials::default_library;
use cadloop::policies::{policy_by_name, run_policy, EpisodeOutcome, WireClient, POLICY_NAMES};
use cadloop::reward::score;
use cadloop::taskgen::{export_dataset, load_tasks, DatasetSizes, GeneratorConfig, TaskInstance};
use cadloop::toolserver::{serve_lines, serve_tcp, FailureConfig, RolloutLog, ServerConfig, ToolServer};
use cadloop::verify::run_suite;

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

const DEFAULT_DENSITY: usize = 4;

#[derive(Parser)]
#[command(name = "cadloop", version, about = "Closed-loop CAD/CAE design environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a feasible task dataset with prompts and a manifest.
    GenDataset {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        mesh_density: usize,
        #[arg(long, default_value_t = 100)]
        train: usize,
        #[arg(long, default_value_t = 20)]
        test: usize,
        #[arg(long, default_value_t = 10)]
        general: usize,
        /// Designs the feasibility search may solve per task.
        #[arg(long)]
        search_budget: Option<usize>,
    },
    /// Serve the tool protocol on stdio, or on TCP with --listen.
    Serve {
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        mesh_density: usize,
        #[arg(long)]
        listen: Option<String>,
        /// Failure probabilities for episodes opened without their own.
        #[arg(long, value_parser = parse_failures)]
        failures: Option<FailureConfig>,
        /// Also write meshes and result fields here.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Run a scripted policy on every task and write one log per task.
    RunEpisodes {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value = "heuristic")]
        policy: String,
        #[arg(long, value_parser = parse_failures)]
        failures: Option<FailureConfig>,
        /// Defaults to the dataset's manifest, then 4.
        #[arg(long)]
        mesh_density: Option<usize>,
        /// Use a running server at host:port instead of an embedded one.
        #[arg(long)]
        connect: Option<String>,
    },
    /// Reward of one rollout log.
    ScoreRollout {
        log: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify final answers and report the aggregate metrics.
    Evaluate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        mesh_density: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solver against closed-form solutions.
    VerifyFem {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_failures(s: &str) -> Result<FailureConfig, String> {
    FailureConfig::parse(s).map_err(|e| e.to_string())
}

fn density_for(tasks: &Path, flag: Option<usize>) -> usize {
    flag.or_else(|| dataset_density(tasks)).unwrap_or(DEFAULT_DENSITY)
}

fn write_out(path: &Option<PathBuf>, text: &str) -> CliResult {
    if let Some(p) = path {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(p, text)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run_remote(
    tasks: &[(String, TaskInstance)],
    policy: &str,
    addr: &str,
    failures: FailureConfig,
) -> CliResult<Vec<(String, EpisodeOutcome)>> {
    let stream = TcpStream::connect(addr)?;
    let mut client = WireClient::new(BufReader::new(stream.try_clone()?), BufWriter::new(stream));
    let mut out = Vec::with_capacity(tasks.len());
    for (id, task) in tasks {
        let mut p = policy_by_name(policy, task.seed).ok_or_else(|| format!("unknown policy `{policy}`"))?;
        let o = run_policy(p.as_mut(), task, &mut client, failures, default_registry(), default_library())?;
        out.push((id.clone(), o));
    }
    Ok(out)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::GenDataset {
            seed,
            out,
            mesh_density,
            train,
            test,
            general,
            search_budget,
        } => {
            let mut config = GeneratorConfig {
                mesh_density,
                ..GeneratorConfig::default()
            };
            if let Some(b) = search_budget {
                config.search_budget = b;
            }
            let manifest = export_dataset(&out, DatasetSizes { train, test, general }, config, seed)?;
            let extreme = manifest.tasks.iter().filter(|t| t.generated.reduction.extreme).count();
            println!(
                "{} tasks written to {} ({} with extreme reduction)",
                manifest.tasks.len(),
                out.display(),
                extreme
            );
        }
        Command::Serve {
            mesh_density,
            listen,
            failures,
            artifacts,
        } => {
            let config = ServerConfig {
                mesh_density,
                artifact_dir: artifacts,
                default_failures: failures.unwrap_or_default(),
            };
            let server = ToolServer::new(config);
            match listen {
                Some(addr) => {
                    eprintln!("listening on {addr}");
                    serve_tcp(Arc::new(server), addr)?;
                }
                None => serve_lines(&server, std::io::stdin().lock(), std::io::stdout().lock())?,
            }
        }
        Command::RunEpisodes {
            tasks,
            logs,
            policy,
            failures,
            mesh_density,
            connect,
        } => {
            if !POLICY_NAMES.contains(&policy.as_str()) {
                return Err(format!("unknown policy `{policy}`; choose one of {POLICY_NAMES:?}").into());
            }
            let task_set = load_tasks(&tasks)?;
            let failures = failures.unwrap_or_default();
            let outcomes = match connect {
                Some(addr) => run_remote(&task_set, &policy, &addr, failures)?,
                None => {
                    let server = server_for(density_for(&tasks, mesh_density));
                    run_episodes(&task_set, &policy, &server, failures)?
                }
            };
            save_logs(&logs, outcomes.iter().map(|(id, o)| (id.as_str(), &o.log)))?;
            let lib = default_library();
            let by_id: std::collections::HashMap<&str, &TaskInstance> =
                task_set.iter().map(|(id, t)| (id.as_str(), t)).collect();
            let rewards: Vec<f64> = outcomes.iter().map(|(id, o)| score(&o.log, by_id[id.as_str()], lib).R).collect();
            let mean = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
            println!(
                "{} episodes with policy {policy}; logs in {}; mean reward {mean:.4}",
                outcomes.len(),
                logs.display()
            );
        }
        Command::ScoreRollout { log, task, out } => {
            let log = RolloutLog::load(&log)?;
            let task = TaskInstance::load(&task)?;
            let record = score(&log, &task, default_library());
            let text = serde_json::to_string_pretty(&record)? + "\n";
            print!("{text}");
            write_out(&out, &text)?;
        }
        Command::Evaluate {
            tasks,
            logs,
            mesh_density,
            out,
        } => {
            let density = density_for(&tasks, mesh_density);
            let report: EvalReport = evaluate_run(
                &load_tasks(&tasks)?,
                &load_logs(&logs)?,
                default_registry(),
                default_library(),
                density,
            )?;
            print!("{}", report.table());
            if let Err(e) = report.check_invariants() {
                eprintln!("report invariant violated: {e}");
            }
            write_out(&out, &report.to_json())?;
        }
        Command::VerifyFem { out } => {
            let checks = run_suite()?;
            for c in &checks {
                println!(
                    "{} {:<40} computed {:.6e} expected {:.6e} rel.err {:.2e} ({:.3} s)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.computed,
                    c.expected,
                    c.relative_error,
                    c.seconds
                );
            }
            write_out(&out, &(serde_json::to_string_pretty(&checks)? + "\n"))?;
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
