//! Protocol descriptor checks and golden-transcript replay.
//!
//! A transcript is NDJSON with one `{"request": ..., "response": ...}` pair
//! per line. Replaying it against a server compares each actual response with
//! the golden one structurally: same success flag and error code, same keys,
//! same JSON types, and equal strings except for opaque handles (mapped
//! consistently) and free-text fields. Numbers are compared only when a
//! tolerance is given, so a different backend can pass unchanged.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::Value;

use super::{Request, Response, DESCRIPTOR};

const HANDLE_KEYS: [&str; 3] = ["episode_id", "geometry_id", "result_id"];
const FREE_TEXT_KEYS: [&str; 3] = ["log", "message", "text"];

#[derive(Debug, Clone, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub description: String,
    pub args: IndexMap<String, String>,
    pub result: IndexMap<String, String>,
    #[serde(default)]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Descriptor {
    pub protocol: String,
    pub version: u32,
    pub request: IndexMap<String, String>,
    pub response: IndexMap<String, String>,
    pub error: IndexMap<String, String>,
    pub error_codes: Vec<String>,
    pub tools: Vec<ToolSpec>,
}

pub fn descriptor() -> Descriptor {
    serde_json::from_str(DESCRIPTOR).expect("bundled descriptor is valid")
}

/// Whether `value` has the descriptor type `ty` (`?` suffix: may be absent
/// or null).
pub fn type_matches(ty: &str, value: Option<&Value>) -> bool {
    let (base, optional) = match ty.strip_suffix('?') {
        Some(b) => (b, true),
        None => (ty, false),
    };
    let Some(v) = value.filter(|v| !v.is_null()) else {
        return optional || base == "any";
    };
    match base {
        "any" => true,
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "map<number>" => v.as_object().is_some_and(|m| m.values().all(Value::is_number)),
        _ => false,
    }
}

fn check_fields(schema: &IndexMap<String, String>, value: &Value, what: &str) -> Result<(), String> {
    let obj = value.as_object().ok_or_else(|| format!("{what} is not an object"))?;
    for (key, ty) in schema {
        if !type_matches(ty, obj.get(key)) {
            return Err(format!("{what}: field `{key}` is not {ty}"));
        }
    }
    Ok(())
}

impl Descriptor {
    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn validate_request(&self, req: &Request) -> Result<(), String> {
        let value = serde_json::to_value(req).map_err(|e| e.to_string())?;
        check_fields(&self.request, &value, "request")?;
        let tool = self.tool(&req.tool).ok_or_else(|| format!("unknown tool `{}`", req.tool))?;
        check_fields(&tool.args, &req.args, &format!("{} args", tool.name))
    }

    /// Checks the envelope, the error code list, and on success the tool's
    /// result fields.
    pub fn validate_response(&self, tool: &str, response: &Value) -> Result<(), String> {
        check_fields(&self.response, response, "response")?;
        let success = response["success"].as_bool().unwrap_or(false);
        if success {
            let payload = response.get("payload").ok_or("successful response without payload")?;
            if let Some(spec) = self.tool(tool) {
                check_fields(&spec.result, payload, &format!("{tool} result"))?;
            }
        } else {
            let error = response.get("error").ok_or("failed response without error")?;
            check_fields(&self.error, error, "error")?;
            let code = error["code"].as_str().unwrap_or_default();
            if !self.error_codes.iter().any(|c| c == code) {
                return Err(format!("undeclared error code `{code}`"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: Request,
    pub response: Value,
}

pub fn read_transcript(text: &str) -> crate::Result<Vec<TranscriptEntry>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn write_transcript(entries: &[TranscriptEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("plain data serializes") + "\n")
        .collect()
}

struct Replay {
    handles: HashMap<String, String>,
    tolerance: Option<f64>,
}

impl Replay {
    fn rewrite(&self, v: &Value) -> Value {
        match v {
            Value::String(s) => Value::String(self.handles.get(s).cloned().unwrap_or_else(|| s.clone())),
            Value::Array(a) => Value::Array(a.iter().map(|x| self.rewrite(x)).collect()),
            Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), self.rewrite(x))).collect()),
            other => other.clone(),
        }
    }

    fn compare(&mut self, path: &str, key: &str, golden: &Value, actual: &Value) -> Result<(), String> {
        match (golden, actual) {
            (Value::Object(g), Value::Object(a)) => {
                let mut gk: Vec<&String> = g.keys().collect();
                let mut ak: Vec<&String> = a.keys().collect();
                gk.sort();
                ak.sort();
                if gk != ak {
                    return Err(format!("{path}: keys {gk:?} != {ak:?}"));
                }
                for (k, gv) in g {
                    self.compare(&format!("{path}.{k}"), k, gv, &a[k])?;
                }
                Ok(())
            }
            (Value::Array(g), Value::Array(a)) => {
                if g.len() != a.len() {
                    return Err(format!("{path}: length {} != {}", g.len(), a.len()));
                }
                for (i, (gv, av)) in g.iter().zip(a).enumerate() {
                    self.compare(&format!("{path}[{i}]"), key, gv, av)?;
                }
                Ok(())
            }
            (Value::String(g), Value::String(a)) => {
                if HANDLE_KEYS.contains(&key) {
                    match self.handles.get(g) {
                        Some(mapped) if mapped != a => Err(format!("{path}: handle {g} maps to {mapped}, got {a}")),
                        Some(_) => Ok(()),
                        None => {
                            self.handles.insert(g.clone(), a.clone());
                            Ok(())
                        }
                    }
                } else if FREE_TEXT_KEYS.contains(&key) || g == a {
                    Ok(())
                } else {
                    Err(format!("{path}: `{g}` != `{a}`"))
                }
            }
            (Value::Number(g), Value::Number(a)) => match self.tolerance {
                Some(tol) => {
                    let (g, a) = (g.as_f64().unwrap_or(f64::NAN), a.as_f64().unwrap_or(f64::NAN));
                    if (g - a).abs() <= tol * g.abs().max(a.abs()) {
                        Ok(())
                    } else {
                        Err(format!("{path}: {g} != {a}"))
                    }
                }
                None => Ok(()),
            },
            (g, a) if std::mem::discriminant(g) == std::mem::discriminant(a) && g == a => Ok(()),
            (g, a) => Err(format!("{path}: {g} != {a}")),
        }
    }
}

/// Replays `entries` through `send`, returning one message per mismatch
/// (empty on success). Requests are rewritten to use the handles the server
/// under test actually issued.
pub fn run_transcript(
    entries: &[TranscriptEntry],
    tolerance: Option<f64>,
    mut send: impl FnMut(Request) -> Response,
) -> Vec<String> {
    let desc = descriptor();
    let mut replay = Replay {
        handles: HashMap::new(),
        tolerance,
    };
    let mut problems = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let golden_req = serde_json::to_value(&entry.request).expect("plain data serializes");
        let request: Request = match serde_json::from_value(replay.rewrite(&golden_req)) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("entry {i}: request no longer parses: {e}"));
                continue;
            }
        };
        let tool = request.tool.clone();
        let actual = send(request).to_value();
        if let Err(e) = desc.validate_response(&tool, &actual) {
            problems.push(format!("entry {i} ({tool}): {e}"));
        }
        if let Err(e) = replay.compare("response", "response", &entry.response, &actual) {
            problems.push(format!("entry {i} ({tool}): {e}"));
        }
    }
    problems
}
