//! Replays a recorded protocol transcript against a server and reports every
//! divergence. With an address it checks a remote server (for instance a
//! backend adapter); otherwise it uses the embedded one.
//!
//! cargo run --release --example replay_transcript -- <transcript.ndjson> [host:port]

use std::io::{BufReader, BufWriter};
use std::net::TcpStream;

use cadloop::policies::{ToolClient, WireClient};
use cadloop::toolserver::conformance::{read_transcript, run_transcript};
use cadloop::toolserver::{Response, ServerConfig, ToolServer};

fn main() -> cadloop::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/transcripts/iteration.ndjson").into());
    let entries = read_transcript(&std::fs::read_to_string(&path)?)?;
    let problems = match args.next() {
        Some(addr) => {
            let stream = TcpStream::connect(addr)?;
            let mut client = WireClient::new(BufReader::new(stream.try_clone()?), BufWriter::new(stream));
            run_transcript(&entries, None, |r| {
                let call_id = r.call_id.clone();
                client
                    .request(r)
                    .unwrap_or_else(|e| Response::err(call_id, cadloop::toolserver::ErrorCode::InvalidRequest, e.to_string()))
            })
        }
        None => {
            let server = ToolServer::new(ServerConfig::with_density(1));
            run_transcript(&entries, Some(1e-12), |r| server.handle(r))
        }
    };
    println!("{} exchanges replayed from {path}", entries.len());
    for p in &problems {
        println!("  {p}");
    }
    if problems.is_empty() {
        println!("conformant");
    }
    Ok(())
}
