//! Structural assertions over recorded traces.
//!
//! Free-form model text is not assertable; tool activity is. [`Expect`]
//! wraps a set of traces and exposes chainable views:
//!
//! - [`ToolInvocations`]: which tools ran, with which inputs and outputs,
//!   how often, and in which order
//! - [`LlmInvocations`]: how often the model was called, mocked or live
//! - [`Expect::reply_contains`]: the one concession to text matching
//!
//! Every check materializes as an [`AssertionOutcome`] whose texts are
//! deterministic: they never contain span ids, trace ids or timestamps, so
//! two runs of the same scenario produce byte-identical outcomes.

mod matcher;

pub use matcher::{deep_subset_match, match_value, MatchMode, Mismatch};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::TraceSnapshot;
use crate::trace::{attr, canonical_json, Span, SpanId, SpanKind, Trace, TraceId};

/// The result of one structural check: what was expected, whether it held,
/// and on failure a diagnostic that names tools, paths and values but never
/// run-specific identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub passed: bool,
    /// Human-readable statement of what was expected. Serialized as
    /// `expectation_text`, the key machine reports use.
    #[serde(rename = "expectation_text")]
    pub expectation: String,
    /// Empty on success, non-empty diagnostic on failure.
    pub detail: String,
}

impl AssertionOutcome {
    fn pass(expectation: String) -> Self {
        AssertionOutcome { passed: true, expectation, detail: String::new() }
    }

    fn fail(expectation: String, detail: String) -> Self {
        debug_assert!(!detail.is_empty());
        AssertionOutcome { passed: false, expectation, detail }
    }

    /// Panics with the full diagnostic when the check failed.
    pub fn assert(&self) {
        if !self.passed {
            panic!("expectation failed: {}\n  {}", self.expectation, self.detail);
        }
    }
}

/// One tool invocation as seen in a trace.
#[derive(Debug, Clone)]
pub struct InvocationView {
    pub tool_name: String,
    pub input: Value,
    pub output: Value,
    pub is_error: bool,
    pub span_id: SpanId,
    pub trace_id: TraceId,
    pub timestamp: i64,
    /// Present when the invocation ran inside a parallel tool group.
    pub group: Option<String>,
}

impl InvocationView {
    fn from_span(span: &Span) -> Self {
        let parse = |key: &str| -> Value {
            let raw = span.attr_str(key).expect("tool span attribute present");
            serde_json::from_str(raw).expect("tool span attribute holds canonical JSON")
        };
        InvocationView {
            tool_name: span.attr_str(attr::TOOL_NAME).expect("tool span has name").to_string(),
            input: parse(attr::TOOL_INPUT),
            output: parse(attr::TOOL_OUTPUT),
            is_error: span.status() == crate::trace::SpanStatus::Error,
            span_id: span.span_id().clone(),
            trace_id: span.trace_id().clone(),
            timestamp: span.start_time(),
            group: span.attr_str(attr::TOOL_GROUP).map(str::to_string),
        }
    }
}

/// One model invocation as seen in a trace.
#[derive(Debug, Clone)]
pub struct LlmView {
    pub stop_reason: String,
    pub mocked: bool,
    pub timestamp: i64,
}

/// Entry point: wraps the traces under inspection.
pub struct Expect<'a> {
    traces: Vec<&'a Trace>,
}

impl<'a> Expect<'a> {
    pub fn traces(traces: &'a [Trace]) -> Self {
        Expect { traces: traces.iter().collect() }
    }

    pub fn trace(trace: &'a Trace) -> Self {
        Expect { traces: vec![trace] }
    }

    pub fn snapshot(snapshot: &'a TraceSnapshot) -> Self {
        Expect { traces: snapshot.traces().iter().collect() }
    }

    /// All tool invocations in chronological order.
    pub fn tool_invocations(&self) -> ToolInvocations {
        let views = self
            .traces
            .iter()
            .flat_map(|t| t.spans_of_kind(SpanKind::ToolInvocation))
            .map(InvocationView::from_span)
            .collect();
        ToolInvocations { views }
    }

    /// All model invocations in chronological order.
    pub fn llm_invocations(&self) -> LlmInvocations {
        let views = self
            .traces
            .iter()
            .flat_map(|t| t.spans_of_kind(SpanKind::LlmInvocation))
            .map(|span| LlmView {
                stop_reason: span
                    .attr_str(attr::LLM_STOP_REASON)
                    .expect("llm span has stop reason")
                    .to_string(),
                mocked: span
                    .attr(attr::LLM_MOCKED)
                    .and_then(crate::trace::AttrValue::as_bool)
                    .expect("llm span has mocked flag"),
                timestamp: span.start_time(),
            })
            .collect();
        LlmInvocations { views, filters: Vec::new() }
    }

    /// Passes when at least one turn's reply contains `needle`.
    pub fn reply_contains(&self, needle: &str) -> AssertionOutcome {
        let expectation = format!("an agent reply contains {needle:?}");
        let replies: Vec<&str> = self.traces.iter().map(|t| t.agent_reply()).collect();
        if replies.iter().any(|r| r.contains(needle)) {
            AssertionOutcome::pass(expectation)
        } else if replies.is_empty() {
            AssertionOutcome::fail(expectation, "no traces were recorded".to_string())
        } else {
            let listed: Vec<String> = replies.iter().map(|r| format!("{r:?}")).collect();
            AssertionOutcome::fail(
                expectation,
                format!("none of the replies contains it: [{}]", listed.join(", ")),
            )
        }
    }
}

/// Chronological tool invocation sequence with order, count and selection
/// checks.
pub struct ToolInvocations {
    views: Vec<InvocationView>,
}

impl ToolInvocations {
    pub fn views(&self) -> &[InvocationView] {
        &self.views
    }

    pub fn count(&self) -> usize {
        self.views.len()
    }

    /// Distinct tool names in first-invocation order.
    pub fn invoked_names(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for view in &self.views {
            if !seen.contains(&view.tool_name) {
                seen.push(view.tool_name.clone());
            }
        }
        seen
    }

    /// Selects all invocations of one tool; the selection fails immediately
    /// when the tool never ran.
    pub fn to_include(self, tool_name: &str) -> ToolSelection {
        let matches: Vec<InvocationView> =
            self.views.iter().filter(|v| v.tool_name == tool_name).cloned().collect();
        let expectation = format!("tool `{tool_name}` is invoked");
        let failure = if matches.is_empty() {
            let invoked = self.invoked_names();
            Some(if invoked.is_empty() {
                "no tools were invoked at all".to_string()
            } else {
                format!("it was never invoked; invoked tools: [{}]", invoked.join(", "))
            })
        } else {
            None
        };
        ToolSelection { tool_name: tool_name.to_string(), matches, expectation, failure }
    }

    /// Exact invocation count for one tool.
    pub fn times(&self, tool_name: &str, n: usize) -> AssertionOutcome {
        let expectation = format!("tool `{tool_name}` is invoked exactly {n} time(s)");
        let found = self.views.iter().filter(|v| v.tool_name == tool_name).count();
        if found == n {
            AssertionOutcome::pass(expectation)
        } else {
            AssertionOutcome::fail(
                expectation,
                format!("found {found} invocation(s) of `{tool_name}`"),
            )
        }
    }

    /// Subsequence check: the named tools appear in this relative order,
    /// with arbitrary other invocations in between. Tools that ran as one
    /// parallel group count as simultaneous: any expected order among
    /// members of the same group is accepted.
    pub fn in_order<I, S>(&self, tool_names: I) -> AssertionOutcome
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let expected: Vec<String> = tool_names.into_iter().map(Into::into).collect();
        let expectation = format!("tools are invoked in order: {}", expected.join(" -> "));
        if expected.is_empty() {
            return AssertionOutcome::fail(
                expectation,
                "at least one tool name is required".to_string(),
            );
        }

        let groups = group_sequence(&self.views);
        let rendered = render_groups(&groups);

        let mut group_index = 0usize;
        let mut available: BTreeMap<String, usize> =
            groups.first().map(|g| g.counts.clone()).unwrap_or_default();
        for (position, name) in expected.iter().enumerate() {
            loop {
                if group_index >= groups.len() {
                    return AssertionOutcome::fail(
                        expectation,
                        format!(
                            "`{name}` (expected at position {}) has no matching invocation \
                             left; actual sequence: {rendered}",
                            position + 1
                        ),
                    );
                }
                match available.get_mut(name.as_str()) {
                    Some(count) if *count > 0 => {
                        *count -= 1;
                        break;
                    }
                    _ => {
                        group_index += 1;
                        if let Some(group) = groups.get(group_index) {
                            available = group.counts.clone();
                        }
                    }
                }
            }
        }
        AssertionOutcome::pass(expectation)
    }
}

struct InvocationGroup {
    /// (trace id, group label); `None` for solo invocations.
    key: Option<(TraceId, String)>,
    counts: BTreeMap<String, usize>,
    ordered_names: Vec<String>,
}

/// Collapses the chronological view sequence into groups: invocations that
/// share a trace and a parallel-group label are simultaneous and adjacent.
fn group_sequence(views: &[InvocationView]) -> Vec<InvocationGroup> {
    let mut groups: Vec<InvocationGroup> = Vec::new();
    for view in views {
        let key = view.group.as_ref().map(|label| (view.trace_id.clone(), label.clone()));
        let extend = key.is_some()
            && groups.last().map(|g| g.key.as_ref() == key.as_ref()).unwrap_or(false);
        if extend {
            let group = groups.last_mut().expect("checked non-empty");
            *group.counts.entry(view.tool_name.clone()).or_insert(0) += 1;
            group.ordered_names.push(view.tool_name.clone());
        } else {
            let mut counts = BTreeMap::new();
            counts.insert(view.tool_name.clone(), 1);
            groups.push(InvocationGroup {
                key,
                counts,
                ordered_names: vec![view.tool_name.clone()],
            });
        }
    }
    groups
}

fn render_groups(groups: &[InvocationGroup]) -> String {
    if groups.is_empty() {
        return "(no tool invocations)".to_string();
    }
    let parts: Vec<String> = groups
        .iter()
        .map(|g| {
            if g.ordered_names.len() == 1 {
                g.ordered_names[0].clone()
            } else {
                format!("({})", g.ordered_names.join(" + "))
            }
        })
        .collect();
    parts.join(" -> ")
}

/// The invocations of one tool, progressively narrowed by structural
/// constraints. The first violated constraint decides the outcome.
pub struct ToolSelection {
    tool_name: String,
    matches: Vec<InvocationView>,
    expectation: String,
    failure: Option<String>,
}

impl ToolSelection {
    /// Keeps invocations whose input contains `subset` structurally.
    pub fn with_input(self, subset: &Value) -> Self {
        self.narrow(subset, "input", |view| &view.input)
    }

    /// Keeps invocations whose output contains `subset` structurally.
    pub fn with_output(self, subset: &Value) -> Self {
        self.narrow(subset, "output", |view| &view.output)
    }

    /// Keeps invocations by error flag.
    pub fn with_error(mut self, is_error: bool) -> Self {
        self.expectation.push_str(if is_error {
            " with an error result"
        } else {
            " with a success result"
        });
        if self.failure.is_some() {
            return self;
        }
        let survivors: Vec<InvocationView> =
            self.matches.iter().filter(|v| v.is_error == is_error).cloned().collect();
        if survivors.is_empty() {
            self.failure = Some(format!(
                "none of the {} remaining invocation(s) of `{}` has is_error={is_error}",
                self.matches.len(),
                self.tool_name
            ));
        }
        self.matches = survivors;
        self
    }

    fn narrow(
        mut self,
        subset: &Value,
        what: &str,
        field: impl Fn(&InvocationView) -> &Value,
    ) -> Self {
        self.expectation.push_str(&format!(" with {what} containing {}", canonical_json(subset)));
        if self.failure.is_some() {
            return self;
        }
        let survivors: Vec<InvocationView> = self
            .matches
            .iter()
            .filter(|v| deep_subset_match(subset, field(v)))
            .cloned()
            .collect();
        if survivors.is_empty() {
            // rank the near-misses: the deepest first mismatch got furthest
            let closest = self
                .matches
                .iter()
                .map(|v| {
                    let mismatch = match_value(subset, field(v), MatchMode::Subset)
                        .expect_err("no survivor means every candidate mismatches");
                    (v, mismatch)
                })
                .max_by_key(|(_, m)| m.depth);
            self.failure = Some(match closest {
                Some((view, mismatch)) => format!(
                    "no invocation of `{}` has a matching {what}; closest candidate {what} \
                     was {}; {mismatch}",
                    self.tool_name,
                    canonical_json(field(view)),
                ),
                None => format!("no invocation of `{}` survived earlier constraints", self.tool_name),
            });
        }
        self.matches = survivors;
        self
    }

    /// Narrows nothing: requires the current selection to have exactly `n`
    /// members.
    pub fn times(mut self, n: usize) -> Self {
        self.expectation.push_str(&format!(" exactly {n} time(s)"));
        if self.failure.is_none() && self.matches.len() != n {
            self.failure = Some(format!(
                "found {} matching invocation(s) of `{}`",
                self.matches.len(),
                self.tool_name
            ));
        }
        self
    }

    /// Surviving invocations, in chronological order.
    pub fn matches(&self) -> &[InvocationView] {
        &self.matches
    }

    pub fn outcome(&self) -> AssertionOutcome {
        match &self.failure {
            None => AssertionOutcome::pass(self.expectation.clone()),
            Some(detail) => AssertionOutcome::fail(self.expectation.clone(), detail.clone()),
        }
    }

    /// Panics with the accumulated diagnostic when any constraint failed.
    pub fn assert(&self) {
        self.outcome().assert();
    }
}

/// Model invocation sequence with narrowing filters and a count check.
pub struct LlmInvocations {
    views: Vec<LlmView>,
    filters: Vec<String>,
}

impl LlmInvocations {
    pub fn views(&self) -> &[LlmView] {
        &self.views
    }

    pub fn count(&self) -> usize {
        self.views.len()
    }

    /// Keeps invocations answered by the scripted mock (`true`) or a real
    /// model (`false`).
    pub fn mocked(mut self, mocked: bool) -> Self {
        self.views.retain(|v| v.mocked == mocked);
        self.filters.push(format!("mocked={mocked}"));
        self
    }

    pub fn stop_reason(mut self, reason: &str) -> Self {
        self.views.retain(|v| v.stop_reason == reason);
        self.filters.push(format!("stop_reason={reason}"));
        self
    }

    pub fn count_is(&self, n: usize) -> AssertionOutcome {
        let scope = if self.filters.is_empty() {
            "llm invocations".to_string()
        } else {
            format!("llm invocations ({})", self.filters.join(", "))
        };
        let expectation = format!("{scope} count is {n}");
        if self.views.len() == n {
            AssertionOutcome::pass(expectation)
        } else {
            AssertionOutcome::fail(expectation, format!("found {}", self.views.len()))
        }
    }
}
