//! Starts a TCP tool server on a local port and drives one episode through
//! it with the wire client, the same way an external agent would.
//!
//! cargo run --release --example wire_client -- [policy]

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use cadloop::materials::default_library;
use cadloop::geometry::default_registry;
use cadloop::policies::{policy_by_name, run_policy, WireClient};
use cadloop::reward::score;
use cadloop::taskgen::TaskInstance;
use cadloop::toolserver::{serve_lines, FailureConfig, ServerConfig, ToolServer};

fn main() -> cadloop::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "heuristic".into());
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let server = Arc::new(ToolServer::new(ServerConfig::with_density(2)));
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let server = Arc::clone(&server);
            std::thread::spawn(move || {
                let reader = BufReader::new(stream.try_clone().expect("socket clone"));
                let _ = serve_lines(&server, reader, stream);
            });
        }
    });
    println!("server on {addr}");

    let task = TaskInstance::from_json(
        r#"{"category": "flat_plate",
            "initial_params": {"length": 120.0, "width": 60.0, "thickness": 4.0},
            "initial_material": "Gray Cast Iron",
            "pressure_mpa": 0.3, "delta_mm": 0.5, "kappa": 5.0, "stress_scale": 1.0,
            "max_rounds": 15, "max_tool_calls": 60, "seed": 3}"#,
    )?;
    let stream = TcpStream::connect(addr)?;
    let mut client = WireClient::new(BufReader::new(stream.try_clone()?), BufWriter::new(stream));
    let mut policy = policy_by_name(&name, task.seed).expect("known policy name");
    let outcome = run_policy(
        policy.as_mut(),
        &task,
        &mut client,
        FailureConfig::NONE,
        default_registry(),
        default_library(),
    )?;
    let s = score(&outcome.log, &task, default_library());
    println!("{} events, {} tool calls, {} rounds", outcome.log.len(), outcome.log.tool_calls(), outcome.rounds);
    println!("final: {}", outcome.submitted.to_json());
    println!("R = {} (cons {}, stop {}, fmt {})", s.R, s.R_cons, s.R_stop, s.R_fmt);
    Ok(())
}
