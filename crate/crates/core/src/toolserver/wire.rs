//! Newline-delimited JSON transport.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::sync::Arc;

use serde_json::Value;

use super::{ErrorCode, Request, Response, ToolServer};

fn respond(server: &ToolServer, line: &str) -> Response {
    match serde_json::from_str::<Request>(line) {
        Ok(req) => server.handle(req),
        Err(e) => {
            let call_id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("call_id").cloned())
                .unwrap_or(Value::Null);
            Response::err(call_id, ErrorCode::InvalidRequest, format!("unreadable request: {e}"))
        }
    }
}

/// Answers one request per input line until end of input.
pub fn serve_lines(server: &ToolServer, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = respond(server, &line);
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection; all connections
/// share the server's episodes.
pub fn serve_tcp(server: Arc<ToolServer>, addr: impl ToSocketAddrs) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    for stream in listener.incoming() {
        let stream = stream?;
        let server = Arc::clone(&server);
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve_lines(&server, reader, BufWriter::new(stream));
        });
    }
    Ok(())
}
