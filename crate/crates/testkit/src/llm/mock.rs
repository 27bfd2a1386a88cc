//! Scripted stand-in for the model.
//!
//! A `MockLlm` consumes a FIFO queue of scripted responses, one per
//! invocation, which makes agent runs deterministic and instant. A
//! `Passthrough` item delegates that one invocation to an attached real
//! client (typically a replay client), so a script can stay scripted for
//! the boring turns and go live only where it matters.

use std::collections::VecDeque;

use serde_json::Value;

use super::{ClientReply, ContentBlock, LlmClient, LlmError, LlmRequest, LlmResponse, StopReason};

/// End-turn item: one or more non-empty text blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedText {
    texts: Vec<String>,
}

impl ScriptedText {
    pub fn new(texts: Vec<String>) -> Result<Self, LlmError> {
        if texts.is_empty() {
            return Err(LlmError::InvalidScript("scripted text needs at least one block".into()));
        }
        if texts.iter().any(String::is_empty) {
            return Err(LlmError::InvalidScript("scripted text blocks must be non-empty".into()));
        }
        Ok(ScriptedText { texts })
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }
}

/// One tool request inside a scripted tool-use item.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolUseRequest {
    pub name: String,
    pub input: Value,
}

impl ToolUseRequest {
    pub fn new(name: impl Into<String>, input: Value) -> Self {
        ToolUseRequest { name: name.into(), input }
    }
}

/// Tool-use item: at least one tool request.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedToolUse {
    requests: Vec<ToolUseRequest>,
}

impl ScriptedToolUse {
    pub fn new(requests: Vec<ToolUseRequest>) -> Result<Self, LlmError> {
        if requests.is_empty() {
            return Err(LlmError::InvalidScript(
                "scripted tool use needs at least one request".into(),
            ));
        }
        Ok(ScriptedToolUse { requests })
    }

    pub fn requests(&self) -> &[ToolUseRequest] {
        &self.requests
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedResponse {
    Text(ScriptedText),
    ToolUse(ScriptedToolUse),
    /// Delegate this invocation to the attached real client.
    Passthrough,
}

impl ScriptedResponse {
    /// Convenience: `ScriptedResponse::text(["Done"])`.
    ///
    /// Panics on an empty list or empty strings; scripts built from data
    /// should go through [`ScriptedText::new`] instead.
    pub fn text<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedResponse::Text(
            ScriptedText::new(texts.into_iter().map(Into::into).collect())
                .expect("invalid scripted text"),
        )
    }

    /// Convenience: `ScriptedResponse::tool_use([("get_logs", json!({"service": "api"}))])`.
    ///
    /// Panics on an empty list; scripts built from data should go through
    /// [`ScriptedToolUse::new`] instead.
    pub fn tool_use<I, S>(requests: I) -> Self
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        ScriptedResponse::ToolUse(
            ScriptedToolUse::new(
                requests.into_iter().map(|(n, i)| ToolUseRequest::new(n, i)).collect(),
            )
            .expect("invalid scripted tool use"),
        )
    }

    pub fn is_passthrough(&self) -> bool {
        matches!(self, ScriptedResponse::Passthrough)
    }
}

/// FIFO scripted client.
///
/// Tool-use ids are assigned as `tooluse-1`, `tooluse-2`, ... in emission
/// order, strictly increasing over the lifetime of one mock. Every
/// incoming request is logged verbatim for structural inspection.
pub struct MockLlm {
    queue: VecDeque<ScriptedResponse>,
    real_client: Option<Box<dyn LlmClient>>,
    call_log: Vec<LlmRequest>,
    consumed: usize,
    next_tool_use: usize,
}

impl MockLlm {
    pub fn new() -> Self {
        MockLlm {
            queue: VecDeque::new(),
            real_client: None,
            call_log: Vec::new(),
            consumed: 0,
            next_tool_use: 1,
        }
    }

    /// Attaches the client that serves `Passthrough` items.
    pub fn with_real_client(mut self, client: Box<dyn LlmClient>) -> Self {
        self.real_client = Some(client);
        self
    }

    /// Appends one scripted item to the queue.
    pub fn add_output(&mut self, response: ScriptedResponse) -> &mut Self {
        self.queue.push_back(response);
        self
    }

    /// Appends a passthrough item: the next matching invocation goes to
    /// the attached real client.
    pub fn add_real_response(&mut self) -> &mut Self {
        self.queue.push_back(ScriptedResponse::Passthrough);
        self
    }

    /// Every request this mock has served, in order.
    pub fn call_log(&self) -> &[LlmRequest] {
        &self.call_log
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }

    fn fresh_tool_use_id(&mut self) -> String {
        let id = format!("tooluse-{}", self.next_tool_use);
        self.next_tool_use += 1;
        id
    }
}

impl Default for MockLlm {
    fn default() -> Self {
        MockLlm::new()
    }
}

impl LlmClient for MockLlm {
    fn invoke(&mut self, request: &LlmRequest) -> Result<ClientReply, LlmError> {
        let item = self.queue.pop_front().ok_or_else(|| LlmError::MockExhausted {
            consumed: self.consumed,
            last_user_text: request.final_user_text(),
        })?;
        self.call_log.push(request.clone());
        self.consumed += 1;
        match item {
            ScriptedResponse::Text(text) => {
                let content = text
                    .texts()
                    .iter()
                    .map(|t| ContentBlock::Text { text: t.clone() })
                    .collect();
                Ok(ClientReply {
                    response: LlmResponse::new(StopReason::EndTurn, content)?,
                    mocked: true,
                })
            }
            ScriptedResponse::ToolUse(tool_use) => {
                let content = tool_use
                    .requests()
                    .iter()
                    .map(|r| ContentBlock::ToolUse {
                        tool_use_id: self.fresh_tool_use_id(),
                        name: r.name.clone(),
                        input: r.input.clone(),
                    })
                    .collect();
                Ok(ClientReply {
                    response: LlmResponse::new(StopReason::ToolUse, content)?,
                    mocked: true,
                })
            }
            ScriptedResponse::Passthrough => {
                let client = self.real_client.as_mut().ok_or(LlmError::NoRealClient)?;
                let reply = client.invoke(request)?;
                Ok(ClientReply { response: reply.response, mocked: false })
            }
        }
    }
}
