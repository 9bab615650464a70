//! Wire messages: newline-delimited JSON requests and responses.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DESCRIPTOR: &str = include_str!("../../data/protocol.json");

/// The four design tools.
pub const TOOLS: [&str; 4] = ["generate_cad", "run_cae", "extract_results", "compute_cost"];

/// Episode and introspection requests that are not tool calls.
pub const CONTROL: [&str; 6] = [
    "describe",
    "open_episode",
    "policy_message",
    "submit_final",
    "get_rollout_log",
    "close_episode",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub episode_id: Option<String>,
    #[serde(default)]
    pub call_id: Value,
    pub tool: String,
    #[serde(default = "empty_object")]
    pub args: Value,
}

fn empty_object() -> Value {
    json!({})
}

impl Request {
    pub fn new(episode_id: Option<&str>, call_id: impl Into<Value>, tool: &str, args: Value) -> Self {
        Self {
            episode_id: episode_id.map(str::to_string),
            call_id: call_id.into(),
            tool: tool.to_string(),
            args,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    RegenFailure,
    MeshFailure,
    SolverFailure,
    MalformedArgs,
    UnknownTool,
    UnknownEpisode,
    EpisodeClosed,
    BudgetExhausted,
    RoundLimit,
    InvalidRequest,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::RegenFailure => "regen_failure",
            ErrorCode::MeshFailure => "mesh_failure",
            ErrorCode::SolverFailure => "solver_failure",
            ErrorCode::MalformedArgs => "malformed_args",
            ErrorCode::UnknownTool => "unknown_tool",
            ErrorCode::UnknownEpisode => "unknown_episode",
            ErrorCode::EpisodeClosed => "episode_closed",
            ErrorCode::BudgetExhausted => "budget_exhausted",
            ErrorCode::RoundLimit => "round_limit",
            ErrorCode::InvalidRequest => "invalid_request",
        }
    }

    /// Toolchain failures a policy is expected to recover from by retrying.
    pub fn is_toolchain_failure(self) -> bool {
        matches!(self, ErrorCode::RegenFailure | ErrorCode::MeshFailure | ErrorCode::SolverFailure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub call_id: Value,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    pub fn ok(call_id: Value, payload: Value) -> Self {
        Self {
            call_id,
            success: true,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn err(call_id: Value, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            call_id,
            success: false,
            payload: None,
            error: Some(ErrorBody {
                code,
                message: message.into(),
            }),
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }

    /// Field of the success payload.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.payload.as_ref().and_then(|p| p.get(key))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("plain data serializes")
    }
}
