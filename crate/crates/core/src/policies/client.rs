//! Ways for a policy to reach a tool server.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::toolserver::{Request, Response, ToolServer};

/// Sends one request and waits for its response.
pub trait ToolClient {
    fn request(&mut self, req: Request) -> Result<Response>;
}

/// Direct calls into a server in the same process.
impl ToolClient for &ToolServer {
    fn request(&mut self, req: Request) -> Result<Response> {
        Ok(self.handle(req))
    }
}

/// Newline-delimited JSON over any reader/writer pair, e.g. a TCP stream or
/// a child process's stdio.
pub struct WireClient<R, W> {
    reader: R,
    writer: W,
    line: String,
}

impl<R: BufRead, W: Write> WireClient<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            line: String::new(),
        }
    }
}

impl<R: BufRead, W: Write> ToolClient for WireClient<R, W> {
    fn request(&mut self, req: Request) -> Result<Response> {
        serde_json::to_writer(&mut self.writer, &req)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.line.clear();
        if self.reader.read_line(&mut self.line)? == 0 {
            return Err(Error::Format("server closed the connection".into()));
        }
        Ok(serde_json::from_str(&self.line)?)
    }
}
