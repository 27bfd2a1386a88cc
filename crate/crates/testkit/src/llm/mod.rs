//! LLM client abstraction shared by real endpoints and test doubles.
//!
//! The agent core only ever talks to [`LlmClient`]; whether responses come
//! from a model behind HTTP, a script, or a replay file is invisible to it
//! (except for the `ai.llm.mocked` span attribute, which reports the
//! `mocked` flag returned here).

mod http;
mod mock;
mod replay;

pub use http::HttpLlmClient;
pub use mock::{MockLlm, ScriptedResponse, ScriptedText, ScriptedToolUse, ToolUseRequest};
pub use replay::{request_digest, RecordReplayClient};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::ToolSpec;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(
        "mock script exhausted after {consumed} response(s); \
         next request's final user input was {last_user_text:?}"
    )]
    MockExhausted { consumed: usize, last_user_text: String },
    #[error("script item is a passthrough but no real client is attached")]
    NoRealClient,
    #[error("replay recording exhausted after {consumed} response(s)")]
    ReplayExhausted { consumed: usize },
    #[error(
        "replay mismatch at entry {index}: recorded digest {recorded}, request digest {incoming}"
    )]
    ReplayMismatch { index: usize, recorded: String, incoming: String },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("endpoint not configured: set {0}")]
    MissingEndpoint(&'static str),
    #[error("http: {0}")]
    Http(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
    ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentBlock {
    Text { text: String },
    ToolUse { tool_use_id: String, name: String, input: serde_json::Value },
    ToolResult { tool_use_id: String, output: serde_json::Value, is_error: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: Vec<ContentBlock>,
}

impl Message {
    pub fn user(text: impl Into<String>) -> Self {
        Message { role: Role::User, content: vec![ContentBlock::Text { text: text.into() }] }
    }

    pub fn assistant(content: Vec<ContentBlock>) -> Self {
        Message { role: Role::Assistant, content }
    }

    pub fn tool_results(content: Vec<ContentBlock>) -> Self {
        Message { role: Role::ToolResult, content }
    }

    pub fn has_tool_use(&self) -> bool {
        self.content.iter().any(|b| matches!(b, ContentBlock::ToolUse { .. }))
    }

    /// Concatenated text blocks of this message.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self
            .content
            .iter()
            .filter_map(|b| match b {
                ContentBlock::Text { text } => Some(text.as_str()),
                _ => None,
            })
            .collect();
        parts.join("\n")
    }
}

/// Full model input for one invocation: instructions, accumulated
/// conversation, and the tool inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system_prompt: String,
    pub messages: Vec<Message>,
    pub tool_specs: Vec<ToolSpec>,
}

impl LlmRequest {
    /// Validates the conversation shape: first message is from the user,
    /// a `tool_result` message only ever follows an assistant message that
    /// requested tools, and two messages of the same role never repeat.
    pub fn new(
        system_prompt: impl Into<String>,
        messages: Vec<Message>,
        tool_specs: Vec<ToolSpec>,
    ) -> Result<Self, LlmError> {
        match messages.first() {
            None => return Err(LlmError::InvalidRequest("messages must be non-empty".into())),
            Some(m) if m.role != Role::User => {
                return Err(LlmError::InvalidRequest("conversation must start with a user message".into()))
            }
            _ => {}
        }
        for (i, pair) in messages.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            let ok = match (prev.role, next.role) {
                (Role::User, Role::Assistant) => true,
                (Role::Assistant, Role::User) => true,
                (Role::Assistant, Role::ToolResult) => prev.has_tool_use(),
                (Role::ToolResult, Role::Assistant) => true,
                _ => false,
            };
            if !ok {
                return Err(LlmError::InvalidRequest(format!(
                    "message {} ({:?}) may not follow message {} ({:?})",
                    i + 2,
                    next.role,
                    i + 1,
                    prev.role
                )));
            }
        }
        Ok(LlmRequest { system_prompt: system_prompt.into(), messages, tool_specs })
    }

    /// Text of the latest user message; what a human last said. Used in
    /// exhaustion diagnostics.
    pub fn final_user_text(&self) -> String {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(Message::text)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTurn,
    ToolUse,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::EndTurn => "end_turn",
            StopReason::ToolUse => "tool_use",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub stop_reason: StopReason,
    pub content: Vec<ContentBlock>,
}

impl LlmResponse {
    /// `tool_use` responses must request at least one tool; `end_turn`
    /// responses must say something and must not request tools.
    pub fn new(stop_reason: StopReason, content: Vec<ContentBlock>) -> Result<Self, LlmError> {
        let response = LlmResponse { stop_reason, content };
        response.validate()?;
        Ok(response)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let tool_uses = self.content.iter().filter(|b| matches!(b, ContentBlock::ToolUse { .. })).count();
        let texts = self.content.iter().filter(|b| matches!(b, ContentBlock::Text { .. })).count();
        match self.stop_reason {
            StopReason::ToolUse if tool_uses == 0 => Err(LlmError::InvalidResponse(
                "stop_reason tool_use requires at least one tool_use block".into(),
            )),
            StopReason::EndTurn if tool_uses > 0 => Err(LlmError::InvalidResponse(
                "stop_reason end_turn must not carry tool_use blocks".into(),
            )),
            StopReason::EndTurn if texts == 0 => Err(LlmError::InvalidResponse(
                "stop_reason end_turn requires at least one text block".into(),
            )),
            _ => Ok(()),
        }
    }

    /// The tool_use blocks in order of appearance.
    pub fn tool_uses(&self) -> Vec<(&str, &str, &serde_json::Value)> {
        self.content
            .iter()
            .filter_map(|b| match b {
                ContentBlock::ToolUse { tool_use_id, name, input } => {
                    Some((tool_use_id.as_str(), name.as_str(), input))
                }
                _ => None,
            })
            .collect()
    }

    /// Concatenated text blocks.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self
            .content
            .iter()
            .filter_map(|b| match b {
                ContentBlock::Text { text } => Some(text.as_str()),
                _ => None,
            })
            .collect();
        parts.join("\n")
    }
}

/// What a client invocation produced: the response itself and whether it
/// was served from a script (true) or a real/recorded model (false).
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReply {
    pub response: LlmResponse,
    pub mocked: bool,
}

/// One synchronous model invocation. Implementations must be
/// substitutable: the agent core treats every client identically.
pub trait LlmClient: Send {
    fn invoke(&mut self, request: &LlmRequest) -> Result<ClientReply, LlmError>;
}
