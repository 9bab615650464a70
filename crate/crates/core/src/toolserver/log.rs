//! Rollout logs: the ordered event record of one episode.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ToolCall,
    ToolResponse,
    PolicyMessage,
    FinalOutput,
    /// Budget exhaustion marker; carries no tool traffic.
    Terminal,
}

impl EventKind {
    pub fn is_tool_traffic(self) -> bool {
        matches!(self, EventKind::ToolCall | EventKind::ToolResponse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: usize,
    pub kind: EventKind,
    pub tool: Option<String>,
    pub payload: Value,
    pub success: bool,
}

impl Event {
    pub fn call_id(&self) -> Option<&Value> {
        self.payload.get("call_id")
    }

    /// Arguments of a tool call.
    pub fn args(&self) -> Option<&Value> {
        self.payload.get("args")
    }

    /// Result object of a successful tool response.
    pub fn result(&self) -> Option<&Value> {
        self.payload.get("payload")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RolloutLog {
    pub events: Vec<Event>,
}

impl RolloutLog {
    pub fn push(&mut self, kind: EventKind, tool: Option<&str>, payload: Value, success: bool) -> usize {
        let t = self.events.len();
        self.events.push(Event {
            t,
            kind,
            tool: tool.map(str::to_string),
            payload,
            success,
        });
        t
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn tool_calls(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::ToolCall).count()
    }

    /// Text of the final output, if one was submitted.
    pub fn final_text(&self) -> Option<&str> {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == EventKind::FinalOutput)
            .and_then(|e| e.payload.get("text"))
            .and_then(Value::as_str)
    }

    /// Indices strictly increase and every tool call is followed immediately
    /// by its response.
    pub fn check_well_formed(&self) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && e.t <= self.events[i - 1].t {
                return Err(Error::Format(format!("event index {} does not increase", e.t)));
            }
            match e.kind {
                EventKind::ToolCall => {
                    let next = self.events.get(i + 1);
                    if !next.is_some_and(|n| n.kind == EventKind::ToolResponse && n.call_id() == e.call_id()) {
                        return Err(Error::Format(format!("tool call at {} has no matching response", e.t)));
                    }
                }
                EventKind::ToolResponse if i == 0 || self.events[i - 1].kind != EventKind::ToolCall => {
                    return Err(Error::Format(format!("response at {} without a call", e.t)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// One JSON event per line.
    pub fn write_ndjson(&self, mut w: impl Write) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_ndjson(r: impl BufRead) -> Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                events.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { events })
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        Self::read_ndjson(text.as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_ndjson(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_ndjson(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
