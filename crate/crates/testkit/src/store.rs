//! In-memory trace collection.
//!
//! A `TraceCollector` hands out one `TurnHandle` per agent turn; spans are
//! emitted through the handle (from any thread) and become a finished
//! `Trace` when the turn ends. Completed traces are queryable as immutable
//! snapshots and can round-trip through `.spans.jsonl` files.
//!
//! Invariants:
//! - timestamps handed out by one collector are strictly increasing, so
//!   trace order and span order are total and survive export/import
//! - a snapshot is a value: later emits never mutate an earlier snapshot
//! - every span emitted into a turn that ends is present in later
//!   snapshots (the emit stress test pins this)

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::trace::{
    attr, now_nanos, parse_span, serialize_span, IdGen, MalformedSpan, MalformedTrace, Span,
    SpanBuilder, SpanId, SpanKind, SpanStatus, Trace, TraceId,
};

/// Groups the turns of one conversation. Non-empty; defaults to a random
/// 36-character identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConversationId(String);

impl ConversationId {
    pub fn new(s: impl Into<String>) -> Result<Self, StoreError> {
        let s = s.into();
        if s.is_empty() {
            return Err(StoreError::EmptyConversationId);
        }
        Ok(ConversationId(s))
    }

    pub fn random() -> Self {
        ConversationId(uuid::Uuid::new_v4().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConversationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("conversation id must be non-empty")]
    EmptyConversationId,
    #[error("collector is closed")]
    CollectorClosed,
    #[error("turn already ended")]
    TurnEnded,
    #[error("span does not belong to this turn: {0}")]
    TraceMismatch(String),
    #[error("{0}")]
    Span(#[from] MalformedSpan),
    #[error("{0}")]
    Trace(#[from] MalformedTrace),
    #[error("line {line}: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: MalformedSpan,
    },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Environment variable: when set, every completed turn is appended to
/// `<dir>/<conversation_id>.spans.jsonl`.
pub const TRACE_DIR_ENV: &str = "TESTKIT_TRACE_DIR";

struct Shared {
    idgen: Mutex<IdGen>,
    clock: Mutex<i64>,
    state: Mutex<CollectorState>,
    trace_dir: Mutex<Option<PathBuf>>,
}

struct CollectorState {
    open: bool,
    traces: Vec<Trace>,
    index: BTreeMap<String, Vec<TraceId>>,
}

impl Shared {
    /// Strictly increasing wall-clock nanoseconds. Ties with the previous
    /// reading are nudged forward one nanosecond, which keeps allocation
    /// order and time order identical.
    fn now(&self) -> i64 {
        let mut last = self.clock.lock().unwrap();
        let now = now_nanos().max(*last + 1);
        *last = now;
        now
    }

    fn next_span_id(&self) -> SpanId {
        self.idgen.lock().unwrap().next_span_id()
    }

    fn next_trace_id(&self) -> TraceId {
        self.idgen.lock().unwrap().next_trace_id()
    }
}

/// Collects the traces of one or more conversations.
pub struct TraceCollector {
    shared: Arc<Shared>,
}

impl TraceCollector {
    /// Random ids; honors `TESTKIT_TRACE_DIR` if set in the environment.
    pub fn new() -> Self {
        Self::with_idgen(IdGen::random())
    }

    /// Deterministic ids for tests that pin exact id values.
    pub fn seeded(seed: u64) -> Self {
        Self::with_idgen(IdGen::seeded(seed))
    }

    fn with_idgen(idgen: IdGen) -> Self {
        let trace_dir = std::env::var_os(TRACE_DIR_ENV).map(PathBuf::from);
        TraceCollector {
            shared: Arc::new(Shared {
                idgen: Mutex::new(idgen),
                clock: Mutex::new(0),
                state: Mutex::new(CollectorState {
                    open: true,
                    traces: Vec::new(),
                    index: BTreeMap::new(),
                }),
                trace_dir: Mutex::new(trace_dir),
            }),
        }
    }

    /// Overrides (or with `None`, disables) the mirror directory regardless
    /// of the environment. Builder form of [`TraceCollector::set_trace_dir`].
    pub fn with_trace_dir(self, dir: Option<PathBuf>) -> Self {
        self.set_trace_dir(dir);
        self
    }

    /// Points completed turns at a mirror directory (or disables mirroring
    /// with `None`). Takes effect for turns that end after the call.
    pub fn set_trace_dir(&self, dir: Option<PathBuf>) {
        *self.shared.trace_dir.lock().unwrap() = dir;
    }

    /// Opens a turn: allocates the trace id and the root `agent_turn` span.
    /// Spans for this turn are emitted through the returned handle.
    pub fn begin_turn(
        &self,
        conversation_id: &ConversationId,
        user_input: &str,
    ) -> Result<TurnHandle, StoreError> {
        if !self.shared.state.lock().unwrap().open {
            return Err(StoreError::CollectorClosed);
        }
        let trace_id = self.shared.next_trace_id();
        let root_span_id = self.shared.next_span_id();
        let root_start = self.shared.now();
        Ok(TurnHandle {
            inner: Arc::new(TurnInner {
                shared: Arc::clone(&self.shared),
                trace_id,
                root_span_id,
                conversation_id: conversation_id.clone(),
                user_input: user_input.to_string(),
                root_start,
                spans: Mutex::new(Vec::new()),
                ended: AtomicBool::new(false),
            }),
        })
    }

    /// Stops accepting new turns. Already-issued handles may still finish.
    pub fn close(&self) {
        self.shared.state.lock().unwrap().open = false;
    }

    /// Immutable copy of everything recorded so far. Turns that have not
    /// ended yet are not part of the snapshot.
    pub fn snapshot(&self) -> TraceSnapshot {
        let state = self.shared.state.lock().unwrap();
        TraceSnapshot { traces: state.traces.clone(), index: state.index.clone() }
    }

    /// Completed traces of one conversation, oldest first.
    pub fn traces_for_conversation(&self, conversation_id: &ConversationId) -> Vec<Trace> {
        self.snapshot().traces_for_conversation(conversation_id)
    }

    /// Writes the current snapshot to a `.spans.jsonl` file.
    pub fn export_jsonl(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let file = fs::File::create(path)?;
        self.snapshot().write_jsonl(io::BufWriter::new(file))
    }
}

impl Default for TraceCollector {
    fn default() -> Self {
        TraceCollector::new()
    }
}

struct TurnInner {
    shared: Arc<Shared>,
    trace_id: TraceId,
    root_span_id: SpanId,
    conversation_id: ConversationId,
    user_input: String,
    root_start: i64,
    spans: Mutex<Vec<Span>>,
    ended: AtomicBool,
}

/// Handle to one open turn. Cheap to clone; emits are safe from multiple
/// threads (concurrent tool execution emits through clones of this).
#[derive(Clone)]
pub struct TurnHandle {
    inner: Arc<TurnInner>,
}

impl TurnHandle {
    pub fn trace_id(&self) -> &TraceId {
        &self.inner.trace_id
    }

    pub fn root_span_id(&self) -> &SpanId {
        &self.inner.root_span_id
    }

    pub fn conversation_id(&self) -> &ConversationId {
        &self.inner.conversation_id
    }

    /// Fresh span id from the collector's generator.
    pub fn next_span_id(&self) -> SpanId {
        self.inner.shared.next_span_id()
    }

    /// Strictly increasing timestamp from the collector's clock.
    pub fn now(&self) -> i64 {
        self.inner.shared.now()
    }

    /// Starts a child span builder with trace id, parent, span id and
    /// conversation id already filled in.
    pub fn child_span(&self, kind: SpanKind, name: impl Into<String>) -> SpanBuilder {
        Span::builder(kind, name)
            .trace_id(self.inner.trace_id.clone())
            .span_id(self.next_span_id())
            .parent(self.inner.root_span_id.clone())
            .attribute(attr::CONVERSATION_ID, self.inner.conversation_id.as_str())
    }

    /// Records a span into the open turn. The span must carry this turn's
    /// trace id, conversation id, and the root as parent.
    pub fn emit(&self, span: Span) -> Result<(), StoreError> {
        if self.inner.ended.load(Ordering::SeqCst) {
            return Err(StoreError::TurnEnded);
        }
        if span.trace_id() != &self.inner.trace_id {
            return Err(StoreError::TraceMismatch(format!(
                "span {} carries trace id {}, turn is {}",
                span.span_id(),
                span.trace_id(),
                self.inner.trace_id
            )));
        }
        if span.conversation_id() != self.inner.conversation_id.as_str() {
            return Err(StoreError::TraceMismatch(format!(
                "span {} carries conversation id {:?}, turn is {:?}",
                span.span_id(),
                span.conversation_id(),
                self.inner.conversation_id.as_str()
            )));
        }
        if span.parent_span_id() != Some(&self.inner.root_span_id) {
            return Err(StoreError::TraceMismatch(format!(
                "span {} must have the turn root {} as parent",
                span.span_id(),
                self.inner.root_span_id
            )));
        }
        self.inner.spans.lock().unwrap().push(span);
        Ok(())
    }

    /// Closes the turn successfully and returns the finished trace.
    pub fn end(&self, agent_reply: &str) -> Result<Trace, StoreError> {
        self.finish(agent_reply, SpanStatus::Ok, None)
    }

    /// Closes the turn with an error status. The reply attribute is set to
    /// the empty string and the error text lands in `ai.turn.error`.
    pub fn end_with_error(&self, error: &str) -> Result<Trace, StoreError> {
        self.finish("", SpanStatus::Error, Some(error))
    }

    fn finish(
        &self,
        agent_reply: &str,
        status: SpanStatus,
        error: Option<&str>,
    ) -> Result<Trace, StoreError> {
        if self.inner.ended.swap(true, Ordering::SeqCst) {
            return Err(StoreError::TurnEnded);
        }
        let children = std::mem::take(&mut *self.inner.spans.lock().unwrap());

        // the root must cover its children even if the clock raced
        let latest_child_end = children.iter().map(Span::end_time).max().unwrap_or(i64::MIN);
        let root_end = self.inner.shared.now().max(latest_child_end);

        let mut builder = Span::builder(SpanKind::AgentTurn, "agent.turn")
            .trace_id(self.inner.trace_id.clone())
            .span_id(self.inner.root_span_id.clone())
            .start_time(self.inner.root_start)
            .end_time(root_end)
            .status(status)
            .attribute(attr::CONVERSATION_ID, self.inner.conversation_id.as_str())
            .attribute(attr::TURN_USER_INPUT, self.inner.user_input.as_str())
            .attribute(attr::TURN_AGENT_REPLY, agent_reply);
        if let Some(error) = error {
            builder = builder.attribute(attr::TURN_ERROR, error);
        }
        let root = builder.build()?;

        let mut spans = children;
        spans.push(root);
        let trace = Trace::from_spans(spans)?;

        {
            let mut state = self.inner.shared.state.lock().unwrap();
            state.traces.push(trace.clone());
            state
                .index
                .entry(self.inner.conversation_id.as_str().to_string())
                .or_default()
                .push(trace.trace_id().clone());
        }

        let dir = self.inner.shared.trace_dir.lock().unwrap().clone();
        if let Some(dir) = dir {
            append_turn_file(&dir, &self.inner.conversation_id, &trace)?;
        }
        Ok(trace)
    }
}

fn append_turn_file(
    dir: &Path,
    conversation_id: &ConversationId,
    trace: &Trace,
) -> Result<(), StoreError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.spans.jsonl", conversation_id.as_str()));
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    for span in trace.spans() {
        writeln!(file, "{}", serialize_span(span))?;
    }
    Ok(())
}

/// Immutable view of a collector at one point in time. Traces are ordered
/// by root start time (strictly increasing per collector).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSnapshot {
    traces: Vec<Trace>,
    index: BTreeMap<String, Vec<TraceId>>,
}

impl TraceSnapshot {
    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    /// Conversation ids present, with their trace ids in turn order.
    pub fn conversation_index(&self) -> &BTreeMap<String, Vec<TraceId>> {
        &self.index
    }

    pub fn traces_for_conversation(&self, conversation_id: &ConversationId) -> Vec<Trace> {
        self.traces
            .iter()
            .filter(|t| t.conversation_id() == conversation_id.as_str())
            .cloned()
            .collect()
    }

    /// All spans of all traces, ascending (start_time, span_id), one
    /// canonical line each.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), StoreError> {
        let mut spans: Vec<&Span> = self.traces.iter().flat_map(|t| t.spans()).collect();
        spans.sort_by_key(|s| s.canonical_key());
        for span in spans {
            writeln!(w, "{}", serialize_span(span))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_jsonl(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let file = fs::File::create(path)?;
        self.write_jsonl(io::BufWriter::new(file))
    }

    /// Parses a `.spans.jsonl` stream back into a snapshot. Errors carry
    /// the 1-based line number of the offending span.
    pub fn read_jsonl(r: impl io::Read) -> Result<Self, StoreError> {
        let reader = io::BufReader::new(r);
        let mut spans = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let span = parse_span(&line)
                .map_err(|source| StoreError::MalformedLine { line: idx + 1, source })?;
            spans.push(span);
        }

        // group by trace id in file order, then rebuild each turn
        let mut order: Vec<TraceId> = Vec::new();
        let mut groups: BTreeMap<TraceId, Vec<Span>> = BTreeMap::new();
        for span in spans {
            let tid = span.trace_id().clone();
            if !groups.contains_key(&tid) {
                order.push(tid.clone());
            }
            groups.entry(tid).or_default().push(span);
        }

        let mut traces = Vec::new();
        for tid in order {
            let group = groups.remove(&tid).expect("group exists");
            traces.push(Trace::from_spans(group)?);
        }
        traces.sort_by_key(|t| t.root().start_time());

        let mut index: BTreeMap<String, Vec<TraceId>> = BTreeMap::new();
        for trace in &traces {
            index
                .entry(trace.conversation_id().to_string())
                .or_default()
                .push(trace.trace_id().clone());
        }
        Ok(TraceSnapshot { traces, index })
    }

    pub fn import_jsonl(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let file = fs::File::open(path)?;
        Self::read_jsonl(file)
    }
}
