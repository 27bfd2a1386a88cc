//! Span model and its canonical one-line JSON form.
//!
//! Canonical form invariants:
//! - exactly one line, no trailing newline, object keys sorted lexicographically
//! - `parent_span_id` is omitted when absent, never null
//! - `serialize_span` then `parse_span` is the identity
//!
//! Everything that can be malformed is rejected at construction; a `Span`
//! value that exists is valid.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Number, Value};
use thiserror::Error;

use super::id::{SpanId, TraceId};

/// Fixed attribute namespace. Producers may add further `ai.*` keys, but
/// these are the ones the framework itself writes and asserts on.
pub mod attr {
    /// Present on every span; non-empty.
    pub const CONVERSATION_ID: &str = "ai.conversation.id";
    /// tool_invocation spans: the registered tool name.
    pub const TOOL_NAME: &str = "ai.tool.name";
    /// tool_invocation spans: tool input as canonical JSON text.
    pub const TOOL_INPUT: &str = "ai.tool.input";
    /// tool_invocation spans: tool output as canonical JSON text.
    pub const TOOL_OUTPUT: &str = "ai.tool.output";
    /// tool_invocation spans, only when several tools ran concurrently out
    /// of one LLM response: shared group label, one label per response.
    pub const TOOL_GROUP: &str = "ai.tool.group";
    /// llm_invocation spans: "end_turn" or "tool_use".
    pub const LLM_STOP_REASON: &str = "ai.llm.stop_reason";
    /// llm_invocation spans: true when the response came from a script.
    pub const LLM_MOCKED: &str = "ai.llm.mocked";
    /// Root span: the user input that started the turn.
    pub const TURN_USER_INPUT: &str = "ai.turn.user_input";
    /// Root span: the agent's final reply text ("" on errored turns).
    pub const TURN_AGENT_REPLY: &str = "ai.turn.agent_reply";
    /// Root span, errored turns only: what went wrong.
    pub const TURN_ERROR: &str = "ai.turn.error";
}

/// A span failed validation or parsing. `field` names the offending JSON
/// field or attribute key.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed span: field {field:?}: {message}")]
pub struct MalformedSpan {
    pub field: String,
    pub message: String,
}

impl MalformedSpan {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        MalformedSpan { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanKind {
    AgentTurn,
    LlmInvocation,
    ToolInvocation,
    MemoryAccess,
    KbQuery,
}

impl SpanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpanKind::AgentTurn => "agent_turn",
            SpanKind::LlmInvocation => "llm_invocation",
            SpanKind::ToolInvocation => "tool_invocation",
            SpanKind::MemoryAccess => "memory_access",
            SpanKind::KbQuery => "kb_query",
        }
    }

    /// The kind set is closed: anything else is a malformed span.
    pub fn parse(s: &str) -> Result<Self, MalformedSpan> {
        match s {
            "agent_turn" => Ok(SpanKind::AgentTurn),
            "llm_invocation" => Ok(SpanKind::LlmInvocation),
            "tool_invocation" => Ok(SpanKind::ToolInvocation),
            "memory_access" => Ok(SpanKind::MemoryAccess),
            "kb_query" => Ok(SpanKind::KbQuery),
            other => Err(MalformedSpan::new("kind", format!("unknown span kind {other:?}"))),
        }
    }
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanStatus {
    Ok,
    Error,
}

impl SpanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpanStatus::Ok => "ok",
            SpanStatus::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Result<Self, MalformedSpan> {
        match s {
            "ok" => Ok(SpanStatus::Ok),
            "error" => Ok(SpanStatus::Error),
            other => Err(MalformedSpan::new("status", format!("unknown status {other:?}"))),
        }
    }
}

/// Attribute values are flat scalars; nested data travels as canonical
/// JSON text inside a string attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl AttrValue {
    fn to_json(&self) -> Value {
        match self {
            AttrValue::Str(s) => Value::String(s.clone()),
            AttrValue::Int(i) => Value::Number((*i).into()),
            // finiteness is checked at construction, so this cannot fail
            AttrValue::Float(f) => Value::Number(Number::from_f64(*f).expect("finite float")),
            AttrValue::Bool(b) => Value::Bool(*b),
        }
    }

    fn from_json(key: &str, v: &Value) -> Result<Self, MalformedSpan> {
        match v {
            Value::String(s) => Ok(AttrValue::Str(s.clone())),
            Value::Bool(b) => Ok(AttrValue::Bool(*b)),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(AttrValue::Int(i))
                } else if let Some(f) = n.as_f64() {
                    Ok(AttrValue::Float(f))
                } else {
                    Err(MalformedSpan::new(key, format!("numeric attribute out of range: {n}")))
                }
            }
            other => Err(MalformedSpan::new(
                key,
                format!("attribute must be string/int/float/bool, got {other}"),
            )),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Str(s.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(s: String) -> Self {
        AttrValue::Str(s)
    }
}

impl From<i64> for AttrValue {
    fn from(i: i64) -> Self {
        AttrValue::Int(i)
    }
}

impl From<f64> for AttrValue {
    fn from(f: f64) -> Self {
        AttrValue::Float(f)
    }
}

impl From<bool> for AttrValue {
    fn from(b: bool) -> Self {
        AttrValue::Bool(b)
    }
}

/// One recorded operation. Construct through [`Span::builder`]; the
/// builder enforces the invariants listed on [`SpanBuilder::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    trace_id: TraceId,
    span_id: SpanId,
    parent_span_id: Option<SpanId>,
    name: String,
    kind: SpanKind,
    start_time: i64,
    end_time: i64,
    status: SpanStatus,
    attributes: BTreeMap<String, AttrValue>,
}

impl Span {
    pub fn builder(kind: SpanKind, name: impl Into<String>) -> SpanBuilder {
        SpanBuilder {
            trace_id: None,
            span_id: None,
            parent_span_id: None,
            name: name.into(),
            kind,
            start_time: None,
            end_time: None,
            status: SpanStatus::Ok,
            attributes: BTreeMap::new(),
        }
    }

    pub fn trace_id(&self) -> &TraceId {
        &self.trace_id
    }

    pub fn span_id(&self) -> &SpanId {
        &self.span_id
    }

    pub fn parent_span_id(&self) -> Option<&SpanId> {
        self.parent_span_id.as_ref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SpanKind {
        self.kind
    }

    /// Nanoseconds since the Unix epoch.
    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn end_time(&self) -> i64 {
        self.end_time
    }

    pub fn status(&self) -> SpanStatus {
        self.status
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttrValue> {
        &self.attributes
    }

    pub fn attr(&self, key: &str) -> Option<&AttrValue> {
        self.attributes.get(key)
    }

    pub fn attr_str(&self, key: &str) -> Option<&str> {
        self.attr(key).and_then(AttrValue::as_str)
    }

    pub fn conversation_id(&self) -> &str {
        // guaranteed non-empty by construction
        self.attr_str(attr::CONVERSATION_ID).expect("span carries ai.conversation.id")
    }

    pub fn is_root(&self) -> bool {
        self.kind == SpanKind::AgentTurn && self.parent_span_id.is_none()
    }

    /// Canonical file ordering: ascending start time, ties by span id.
    pub fn canonical_key(&self) -> (i64, &SpanId) {
        (self.start_time, &self.span_id)
    }
}

pub struct SpanBuilder {
    trace_id: Option<TraceId>,
    span_id: Option<SpanId>,
    parent_span_id: Option<SpanId>,
    name: String,
    kind: SpanKind,
    start_time: Option<i64>,
    end_time: Option<i64>,
    status: SpanStatus,
    attributes: BTreeMap<String, AttrValue>,
}

impl SpanBuilder {
    pub fn trace_id(mut self, id: TraceId) -> Self {
        self.trace_id = Some(id);
        self
    }

    pub fn span_id(mut self, id: SpanId) -> Self {
        self.span_id = Some(id);
        self
    }

    pub fn parent(mut self, id: SpanId) -> Self {
        self.parent_span_id = Some(id);
        self
    }

    pub fn start_time(mut self, ns: i64) -> Self {
        self.start_time = Some(ns);
        self
    }

    pub fn end_time(mut self, ns: i64) -> Self {
        self.end_time = Some(ns);
        self
    }

    pub fn status(mut self, status: SpanStatus) -> Self {
        self.status = status;
        self
    }

    pub fn attribute(mut self, key: impl Into<String>, value: impl Into<AttrValue>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    /// Validates and freezes the span. Rules:
    /// - trace id, span id, start and end times are mandatory
    /// - end_time >= start_time
    /// - float attributes must be finite (JSON cannot carry NaN/inf)
    /// - `ai.conversation.id` must be present and a non-empty string
    /// - tool_invocation spans carry `ai.tool.name` / `ai.tool.input` /
    ///   `ai.tool.output`, the latter two being valid JSON text
    /// - llm_invocation spans carry `ai.llm.stop_reason` of "end_turn" or
    ///   "tool_use", and a boolean `ai.llm.mocked`
    pub fn build(self) -> Result<Span, MalformedSpan> {
        let trace_id =
            self.trace_id.ok_or_else(|| MalformedSpan::new("trace_id", "missing trace_id"))?;
        let span_id =
            self.span_id.ok_or_else(|| MalformedSpan::new("span_id", "missing span_id"))?;
        let start_time = self
            .start_time
            .ok_or_else(|| MalformedSpan::new("start_time", "missing start_time"))?;
        let end_time =
            self.end_time.ok_or_else(|| MalformedSpan::new("end_time", "missing end_time"))?;
        let span = Span {
            trace_id,
            span_id,
            parent_span_id: self.parent_span_id,
            name: self.name,
            kind: self.kind,
            start_time,
            end_time,
            status: self.status,
            attributes: self.attributes,
        };
        validate(&span)?;
        Ok(span)
    }
}

fn require_str_attr<'a>(span: &'a Span, key: &str) -> Result<&'a str, MalformedSpan> {
    match span.attr(key) {
        Some(AttrValue::Str(s)) => Ok(s),
        Some(_) => Err(MalformedSpan::new(key, "attribute must be a string")),
        None => Err(MalformedSpan::new(
            key,
            format!("{} span is missing required attribute", span.kind),
        )),
    }
}

fn validate(span: &Span) -> Result<(), MalformedSpan> {
    if span.name.is_empty() {
        return Err(MalformedSpan::new("name", "span name must be non-empty"));
    }
    if span.end_time < span.start_time {
        return Err(MalformedSpan::new(
            "end_time",
            format!("end_time {} precedes start_time {}", span.end_time, span.start_time),
        ));
    }
    for (key, value) in &span.attributes {
        if let AttrValue::Float(f) = value {
            if !f.is_finite() {
                return Err(MalformedSpan::new(key.clone(), "float attribute must be finite"));
            }
        }
    }
    let conv = require_str_attr(span, attr::CONVERSATION_ID).map_err(|_| {
        MalformedSpan::new(attr::CONVERSATION_ID, "every span must carry a conversation id")
    })?;
    if conv.is_empty() {
        return Err(MalformedSpan::new(attr::CONVERSATION_ID, "conversation id must be non-empty"));
    }
    match span.kind {
        SpanKind::ToolInvocation => {
            require_str_attr(span, attr::TOOL_NAME)?;
            for key in [attr::TOOL_INPUT, attr::TOOL_OUTPUT] {
                let text = require_str_attr(span, key)?;
                serde_json::from_str::<Value>(text).map_err(|e| {
                    MalformedSpan::new(key, format!("attribute must hold JSON text: {e}"))
                })?;
            }
        }
        SpanKind::LlmInvocation => {
            let stop = require_str_attr(span, attr::LLM_STOP_REASON)?;
            if stop != "end_turn" && stop != "tool_use" {
                return Err(MalformedSpan::new(
                    attr::LLM_STOP_REASON,
                    format!("must be \"end_turn\" or \"tool_use\", got {stop:?}"),
                ));
            }
            match span.attr(attr::LLM_MOCKED) {
                Some(AttrValue::Bool(_)) => {}
                Some(_) => {
                    return Err(MalformedSpan::new(attr::LLM_MOCKED, "attribute must be a bool"))
                }
                None => {
                    return Err(MalformedSpan::new(
                        attr::LLM_MOCKED,
                        "llm_invocation span is missing required attribute",
                    ))
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Current wall-clock time in nanoseconds since the Unix epoch.
pub fn now_nanos() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as i64)
        .unwrap_or(0)
}

/// Compact JSON with lexicographically sorted object keys. serde_json maps
/// are BTree-backed here (the preserve_order feature is deliberately off),
/// so sorting falls out of serialization.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(value).expect("JSON value serializes")
}

/// Canonical one-line form, suitable for `.spans.jsonl` files.
pub fn serialize_span(span: &Span) -> String {
    let mut obj = Map::new();
    let mut attrs = Map::new();
    for (k, v) in &span.attributes {
        attrs.insert(k.clone(), v.to_json());
    }
    obj.insert("attributes".into(), Value::Object(attrs));
    obj.insert("end_time".into(), Value::Number(span.end_time.into()));
    obj.insert("kind".into(), Value::String(span.kind.as_str().into()));
    obj.insert("name".into(), Value::String(span.name.clone()));
    if let Some(parent) = &span.parent_span_id {
        obj.insert("parent_span_id".into(), Value::String(parent.as_str().into()));
    }
    obj.insert("span_id".into(), Value::String(span.span_id.as_str().into()));
    obj.insert("start_time".into(), Value::Number(span.start_time.into()));
    obj.insert("status".into(), Value::String(span.status.as_str().into()));
    obj.insert("trace_id".into(), Value::String(span.trace_id.as_str().into()));
    canonical_json(&Value::Object(obj))
}

fn take_str(obj: &Map<String, Value>, field: &str) -> Result<String, MalformedSpan> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(MalformedSpan::new(field, format!("expected string, got {other}"))),
        None => Err(MalformedSpan::new(field, "missing field")),
    }
}

fn take_i64(obj: &Map<String, Value>, field: &str) -> Result<i64, MalformedSpan> {
    match obj.get(field) {
        Some(Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| MalformedSpan::new(field, format!("expected integer, got {n}"))),
        Some(other) => Err(MalformedSpan::new(field, format!("expected integer, got {other}"))),
        None => Err(MalformedSpan::new(field, "missing field")),
    }
}

/// Parse one canonical line back into a span. All construction invariants
/// are re-checked; errors name the offending field.
pub fn parse_span(line: &str) -> Result<Span, MalformedSpan> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| MalformedSpan::new("json", format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| MalformedSpan::new("json", "span line must be a JSON object"))?;

    let trace_id = TraceId::parse(&take_str(obj, "trace_id")?)?;
    let span_id = SpanId::parse(&take_str(obj, "span_id")?)?;
    let parent_span_id = match obj.get("parent_span_id") {
        None => None,
        Some(Value::String(s)) => Some(SpanId::parse(s).map_err(|e| {
            MalformedSpan::new("parent_span_id", e.message)
        })?),
        Some(other) => {
            return Err(MalformedSpan::new(
                "parent_span_id",
                format!("expected string, got {other}"),
            ))
        }
    };
    let kind = SpanKind::parse(&take_str(obj, "kind")?)?;
    let status = SpanStatus::parse(&take_str(obj, "status")?)?;
    let name = take_str(obj, "name")?;
    let start_time = take_i64(obj, "start_time")?;
    let end_time = take_i64(obj, "end_time")?;

    let mut attributes = BTreeMap::new();
    match obj.get("attributes") {
        Some(Value::Object(attrs)) => {
            for (k, v) in attrs {
                attributes.insert(k.clone(), AttrValue::from_json(k, v)?);
            }
        }
        Some(other) => {
            return Err(MalformedSpan::new("attributes", format!("expected object, got {other}")))
        }
        None => return Err(MalformedSpan::new("attributes", "missing field")),
    }

    let mut builder = Span::builder(kind, name)
        .trace_id(trace_id)
        .span_id(span_id)
        .start_time(start_time)
        .end_time(end_time)
        .status(status);
    if let Some(parent) = parent_span_id {
        builder = builder.parent(parent);
    }
    for (k, v) in attributes {
        builder = builder.attribute(k, v);
    }
    builder.build()
}
