//! Span and trace model with a canonical JSONL wire format.
//!
//! A trace is everything one agent turn did: exactly one `agent_turn` root
//! span plus the LLM and tool spans recorded while handling that turn, all
//! sharing a trace id and a conversation id. Assertions never look at raw
//! model text; they look at these spans.

mod id;
mod span;

pub use id::{IdGen, SpanId, TraceId};
pub use span::{
    attr, canonical_json, now_nanos, parse_span, serialize_span, AttrValue, MalformedSpan, Span,
    SpanBuilder, SpanKind, SpanStatus,
};

use thiserror::Error;

/// The spans did not form a valid single-turn trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MalformedTrace {
    #[error("trace has no spans")]
    Empty,
    #[error("trace {trace_id} has no agent_turn root span")]
    NoRoot { trace_id: String },
    #[error("trace {trace_id} has {count} root spans, expected exactly one")]
    MultipleRoots { trace_id: String, count: usize },
    #[error("span {span_id} carries trace id {found}, expected {expected}")]
    MixedTraceIds { span_id: String, expected: String, found: String },
    #[error("span {span_id} carries conversation id {found:?}, expected {expected:?}")]
    MixedConversationIds { span_id: String, expected: String, found: String },
    #[error("span {span_id} has parent {parent} which is not the root span")]
    DanglingParent { span_id: String, parent: String },
    #[error("root span is missing attribute {key:?}")]
    MissingRootAttr { key: String },
}

/// One agent turn: a root span and its children, time-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    trace_id: TraceId,
    // sorted by (start_time, span_id); element `root_index` is the root
    spans: Vec<Span>,
    root_index: usize,
}

impl Trace {
    /// Validates and orders the spans of one turn. Rules:
    /// - all spans share one trace id and one conversation id
    /// - exactly one root: kind `agent_turn`, no parent
    /// - every non-root span's parent is the root (turn traces are flat:
    ///   depth two, everything hangs off the turn)
    /// - root carries `ai.turn.user_input` and `ai.turn.agent_reply`
    pub fn from_spans(spans: Vec<Span>) -> Result<Self, MalformedTrace> {
        let first = spans.first().ok_or(MalformedTrace::Empty)?;
        let trace_id = first.trace_id().clone();
        let conversation = first.conversation_id().to_string();

        for span in &spans {
            if span.trace_id() != &trace_id {
                return Err(MalformedTrace::MixedTraceIds {
                    span_id: span.span_id().to_string(),
                    expected: trace_id.to_string(),
                    found: span.trace_id().to_string(),
                });
            }
            if span.conversation_id() != conversation {
                return Err(MalformedTrace::MixedConversationIds {
                    span_id: span.span_id().to_string(),
                    expected: conversation.clone(),
                    found: span.conversation_id().to_string(),
                });
            }
        }

        let roots: Vec<&Span> = spans.iter().filter(|s| s.is_root()).collect();
        let root = match roots.len() {
            0 => return Err(MalformedTrace::NoRoot { trace_id: trace_id.to_string() }),
            1 => roots[0],
            n => {
                return Err(MalformedTrace::MultipleRoots { trace_id: trace_id.to_string(), count: n })
            }
        };
        let root_id = root.span_id().clone();

        for key in [attr::TURN_USER_INPUT, attr::TURN_AGENT_REPLY] {
            if root.attr_str(key).is_none() {
                return Err(MalformedTrace::MissingRootAttr { key: key.to_string() });
            }
        }

        for span in &spans {
            if span.span_id() == &root_id {
                continue;
            }
            match span.parent_span_id() {
                Some(parent) if parent == &root_id => {}
                Some(parent) => {
                    return Err(MalformedTrace::DanglingParent {
                        span_id: span.span_id().to_string(),
                        parent: parent.to_string(),
                    })
                }
                None => {
                    // non-root span without a parent: agent_turn kinds were
                    // caught as MultipleRoots, so this is a stray orphan
                    return Err(MalformedTrace::DanglingParent {
                        span_id: span.span_id().to_string(),
                        parent: "<none>".to_string(),
                    });
                }
            }
        }

        let mut spans = spans;
        spans.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
        let root_index = spans
            .iter()
            .position(|s| s.span_id() == &root_id)
            .expect("root survives sorting");
        Ok(Trace { trace_id, spans, root_index })
    }

    pub fn trace_id(&self) -> &TraceId {
        &self.trace_id
    }

    /// All spans including the root, ascending (start_time, span_id).
    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn root(&self) -> &Span {
        &self.spans[self.root_index]
    }

    pub fn conversation_id(&self) -> &str {
        self.root().conversation_id()
    }

    pub fn user_input(&self) -> &str {
        self.root().attr_str(attr::TURN_USER_INPUT).expect("validated at construction")
    }

    pub fn agent_reply(&self) -> &str {
        self.root().attr_str(attr::TURN_AGENT_REPLY).expect("validated at construction")
    }

    pub fn spans_of_kind(&self, kind: SpanKind) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(move |s| s.kind() == kind)
    }
}
