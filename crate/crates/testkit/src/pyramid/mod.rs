//! Layered test runner: unit, then integration, then acceptance.
//!
//! Cases are grouped by layer and layers run bottom-up. A failing or
//! erroring case gates every later layer: their cases are reported as
//! skipped and the run exits non-zero. Within one layer every case runs
//! by default, so a single report shows all defects of that layer;
//! `fail_fast_within_layer` opts into skipping the rest of a layer too.
//!
//! Unit and integration cases must be fully scripted. A passthrough
//! script item in those layers is a configuration error, not a test
//! failure: lower layers stay fast and offline, only acceptance cases
//! may consult a real or replayed model.

mod discover;
mod report;

pub use discover::{discover, DiscoverFilter};
pub use report::{CaseReport, Counts, LayerReport, RunReport, ToolCoverage};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::case::{Case, CaseStatus};
use crate::trace::{attr, SpanKind};

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Unparseable case file; the message carries serde's line and column.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Parseable but semantically broken case file.
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("unknown layer {value:?}; expected unit, integration or acceptance")]
    UnknownLayer { value: String },
    #[error(
        "case {case:?} in layer {layer} contains a passthrough script item; \
         only acceptance cases may consult a real model"
    )]
    PassthroughOutsideAcceptance { case: String, layer: Layer },
    #[error("case {case:?} references unknown agent {agent:?}")]
    UnknownAgent { case: String, agent: String },
    #[error("case {case:?} could not start: {message}")]
    CaseSetup { case: String, message: String },
}

/// Pyramid layer, ordered bottom-up. A layer runs only when every layer
/// below it passed.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Unit,
    Integration,
    Acceptance,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Unit, Layer::Integration, Layer::Acceptance];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Unit => "unit",
            Layer::Integration => "integration",
            Layer::Acceptance => "acceptance",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layer {
    type Err = PyramidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit" => Ok(Layer::Unit),
            "integration" => Ok(Layer::Integration),
            "acceptance" => Ok(Layer::Acceptance),
            other => Err(PyramidError::UnknownLayer { value: other.to_string() }),
        }
    }
}

/// A runnable case bound to its layer and the named agent fixture it
/// drives. Produced by [`discover`] or built programmatically.
#[derive(Debug, Clone)]
pub struct DiscoveredCase {
    case: Case,
    layer: Layer,
    agent_name: String,
    source: Option<PathBuf>,
}

impl DiscoveredCase {
    pub fn new(case: Case, layer: Layer, agent_name: impl Into<String>) -> Self {
        DiscoveredCase { case, layer, agent_name: agent_name.into(), source: None }
    }

    pub(crate) fn with_source(mut self, source: PathBuf) -> Self {
        self.source = Some(source);
        self
    }

    pub fn case(&self) -> &Case {
        &self.case
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn agent_name(&self) -> &str {
        &self.agent_name
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PyramidOptions {
    /// Worker threads per layer; 0 and 1 both mean serial execution.
    /// Ignored (forced serial) when `fail_fast_within_layer` is set, so
    /// skipping stays deterministic.
    pub jobs: usize,
    /// Skip the rest of a layer after its first non-passing case.
    pub fail_fast_within_layer: bool,
    /// Mirror every finished turn into this directory as JSONL.
    pub trace_dir: Option<PathBuf>,
}

/// Resolves an agent fixture name to a fresh agent instance. Each case
/// execution gets its own instance, so cases never share tool state.
pub type AgentFactory<'a> = &'a (dyn Fn(&str) -> Option<Agent> + Sync);

struct Executed {
    report: CaseReport,
    invoked: BTreeSet<String>,
}

/// Runs the discovered cases layer by layer and assembles the report.
///
/// Configuration problems (passthrough outside acceptance, unknown agent
/// names, a case whose replay client cannot start) abort with an error;
/// everything else is captured per case and reflected in the exit code.
pub fn run_pyramid(
    cases: &[DiscoveredCase],
    options: &PyramidOptions,
    agent_factory: AgentFactory,
) -> Result<RunReport, PyramidError> {
    for dc in cases {
        if dc.layer != Layer::Acceptance && dc.case.script().iter().any(|s| s.is_passthrough())
        {
            return Err(PyramidError::PassthroughOutsideAcceptance {
                case: dc.case.name().to_string(),
                layer: dc.layer,
            });
        }
    }

    // Resolve every agent once up front: unknown names abort before any
    // case runs, and the probe records each agent's registered tools for
    // the coverage figures (needed even for layers that end up skipped).
    let mut registered: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for dc in cases {
        if !registered.contains_key(dc.agent_name.as_str()) {
            let agent = agent_factory(&dc.agent_name).ok_or_else(|| {
                PyramidError::UnknownAgent {
                    case: dc.case.name().to_string(),
                    agent: dc.agent_name.clone(),
                }
            })?;
            registered
                .insert(dc.agent_name.as_str(), agent.registered_tools().into_iter().collect());
        }
    }

    let mut by_layer: BTreeMap<Layer, Vec<usize>> = BTreeMap::new();
    for (i, dc) in cases.iter().enumerate() {
        by_layer.entry(dc.layer).or_default().push(i);
    }
    for indices in by_layer.values_mut() {
        indices.sort_by(|&a, &b| cases[a].case.name().cmp(cases[b].case.name()));
    }

    let mut layers = Vec::with_capacity(by_layer.len());
    let mut gate: Option<Layer> = None;
    for (&layer, indices) in &by_layer {
        let started = Instant::now();
        let executed: Vec<Executed> = if gate.is_some() {
            indices.iter().map(|&i| skipped(&cases[i])).collect()
        } else {
            run_layer(cases, indices, options, agent_factory)?
        };

        let mut counts = Counts::default();
        let mut invoked = BTreeSet::new();
        let mut case_reports = Vec::with_capacity(executed.len());
        for mut e in executed {
            counts.record(e.report.status);
            invoked.append(&mut e.invoked);
            case_reports.push(e.report);
        }
        let registered_union: BTreeSet<String> = indices
            .iter()
            .flat_map(|&i| registered[cases[i].agent_name.as_str()].iter().cloned())
            .collect();

        if gate.is_none() && (counts.failed > 0 || counts.errored > 0) {
            gate = Some(layer);
        }
        layers.push(LayerReport {
            layer,
            duration_ms: started.elapsed().as_millis() as u64,
            counts,
            tool_coverage: ToolCoverage::new(registered_union, invoked),
            cases: case_reports,
        });
    }

    let clean = layers.iter().all(|l| l.counts.failed == 0 && l.counts.errored == 0);
    Ok(RunReport { exit_code: if clean { 0 } else { 1 }, gate_stopped_at: gate, layers })
}

fn skipped(dc: &DiscoveredCase) -> Executed {
    Executed {
        report: CaseReport {
            name: dc.case.name().to_string(),
            status: CaseStatus::Skipped,
            assertions: Vec::new(),
            error: None,
        },
        invoked: BTreeSet::new(),
    }
}

fn run_layer(
    cases: &[DiscoveredCase],
    indices: &[usize],
    options: &PyramidOptions,
    agent_factory: AgentFactory,
) -> Result<Vec<Executed>, PyramidError> {
    let jobs = if options.fail_fast_within_layer { 1 } else { options.jobs.max(1) };
    if jobs <= 1 {
        let mut executed = Vec::with_capacity(indices.len());
        let mut stop = false;
        for &i in indices {
            if stop {
                executed.push(skipped(&cases[i]));
                continue;
            }
            let e = execute_case(&cases[i], options, agent_factory)?;
            stop = options.fail_fast_within_layer && e.report.status != CaseStatus::Passed;
            executed.push(e);
        }
        return Ok(executed);
    }

    // Work-stealing over a shared cursor; results land in per-case slots
    // so the report order stays independent of completion order.
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Executed, PyramidError>>>> =
        indices.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(indices.len()) {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                if slot >= indices.len() {
                    break;
                }
                let result = execute_case(&cases[indices[slot]], options, agent_factory);
                *slots[slot].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every claimed slot"))
        .collect()
}

fn execute_case(
    dc: &DiscoveredCase,
    options: &PyramidOptions,
    agent_factory: AgentFactory,
) -> Result<Executed, PyramidError> {
    let mut agent = agent_factory(&dc.agent_name).expect("agent names validated up front");
    if let Some(dir) = &options.trace_dir {
        agent.collector().set_trace_dir(Some(dir.clone()));
    }
    let result = dc.case.run(&mut agent).map_err(|e| PyramidError::CaseSetup {
        case: dc.case.name().to_string(),
        message: e.to_string(),
    })?;

    let mut invoked = BTreeSet::new();
    for trace in &result.traces {
        for span in trace.spans_of_kind(SpanKind::ToolInvocation) {
            if let Some(name) = span.attr_str(attr::TOOL_NAME) {
                invoked.insert(name.to_string());
            }
        }
    }
    Ok(Executed {
        report: CaseReport {
            name: result.case_name,
            status: result.status,
            assertions: result.assertions,
            error: result.failure,
        },
        invoked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{AgentConfig, ParameterSchema, ToolSpec};
    use crate::case::{CaseAssertion, ReplyContainsCheck};
    use crate::llm::ScriptedResponse;
    use serde_json::json;
    use std::sync::Arc;

    fn five_tool_agent() -> Agent {
        let mut agent = Agent::new(AgentConfig::new("test agent")).unwrap();
        for name in ["alpha", "bravo", "charlie", "delta", "foxtrot"] {
            agent
                .register_tool(
                    ToolSpec::new(name, "test tool", ParameterSchema::empty()).unwrap(),
                    Arc::new(|_| Ok(json!({"ok": true}))),
                )
                .unwrap();
        }
        agent
    }

    fn factory(name: &str) -> Option<Agent> {
        (name == "five").then(five_tool_agent)
    }

    fn passing(name: &str, layer: Layer) -> DiscoveredCase {
        let case = Case::new(name, ["hi"])
            .unwrap()
            .with_mock_script(vec![ScriptedResponse::text(["done"])])
            .with_assertion(CaseAssertion::ReplyContains(ReplyContainsCheck {
                reply_contains: "done".into(),
            }));
        DiscoveredCase::new(case, layer, "five")
    }

    fn failing(name: &str, layer: Layer) -> DiscoveredCase {
        let case = Case::new(name, ["hi"])
            .unwrap()
            .with_mock_script(vec![ScriptedResponse::text(["done"])])
            .with_assertion(CaseAssertion::ReplyContains(ReplyContainsCheck {
                reply_contains: "absent".into(),
            }));
        DiscoveredCase::new(case, layer, "five")
    }

    #[test]
    fn all_passing_run_exits_zero_without_gate() {
        let cases = vec![
            passing("u1", Layer::Unit),
            passing("i1", Layer::Integration),
            passing("a1", Layer::Acceptance),
        ];
        let report =
            run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        assert_eq!(report.exit_code, 0);
        assert_eq!(report.gate_stopped_at, None);
        assert_eq!(report.layers.len(), 3);
        assert!(report.layers.iter().all(|l| l.counts.passed == 1));
    }

    #[test]
    fn integration_failure_gates_acceptance() {
        let cases = vec![
            passing("u1", Layer::Unit),
            failing("i1", Layer::Integration),
            passing("i2", Layer::Integration),
            passing("a1", Layer::Acceptance),
        ];
        let report =
            run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        assert_eq!(report.exit_code, 1);
        assert_eq!(report.gate_stopped_at, Some(Layer::Integration));

        let integration = &report.layers[1];
        assert_eq!(integration.counts.failed, 1);
        assert_eq!(integration.counts.passed, 1, "whole layer still runs");

        let acceptance = &report.layers[2];
        assert_eq!(acceptance.counts.skipped, 1);
        assert!(acceptance.cases.iter().all(|c| c.status == CaseStatus::Skipped));
    }

    #[test]
    fn fail_fast_within_layer_skips_the_rest_of_the_layer() {
        let cases = vec![
            failing("a-fails", Layer::Unit),
            passing("b-never-runs", Layer::Unit),
        ];
        let options =
            PyramidOptions { fail_fast_within_layer: true, ..PyramidOptions::default() };
        let report = run_pyramid(&cases, &options, &factory).unwrap();
        let unit = &report.layers[0];
        assert_eq!(unit.counts.failed, 1);
        assert_eq!(unit.counts.skipped, 1);
        assert_eq!(unit.cases[1].status, CaseStatus::Skipped);
    }

    #[test]
    fn three_of_five_tools_is_ratio_point_six() {
        let case = Case::new("invoke-three", ["go"]).unwrap().with_mock_script(vec![
            ScriptedResponse::tool_use([
                ("alpha", json!({})),
                ("bravo", json!({})),
                ("charlie", json!({})),
            ]),
            ScriptedResponse::text(["done"]),
        ]);
        let cases = vec![DiscoveredCase::new(case, Layer::Unit, "five")];
        let report =
            run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        let coverage = &report.layers[0].tool_coverage;
        assert_eq!(coverage.ratio, 0.6);
        assert_eq!(coverage.invoked_tools, ["alpha", "bravo", "charlie"]);
        assert_eq!(coverage.registered_tools.len(), 5);
    }

    #[test]
    fn repeated_runs_agree_modulo_duration() {
        let cases = vec![
            passing("u1", Layer::Unit),
            failing("i1", Layer::Integration),
            passing("a1", Layer::Acceptance),
        ];
        let mut first = run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        let mut second = run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        for layer in first.layers.iter_mut().chain(second.layers.iter_mut()) {
            layer.duration_ms = 0;
        }
        assert_eq!(first.to_json(), second.to_json());
    }

    #[test]
    fn parallel_execution_matches_serial_output() {
        let cases: Vec<DiscoveredCase> =
            (0..8).map(|i| passing(&format!("case-{i}"), Layer::Unit)).collect();
        let serial =
            run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        let parallel = run_pyramid(
            &cases,
            &PyramidOptions { jobs: 4, ..PyramidOptions::default() },
            &factory,
        )
        .unwrap();
        let strip = |mut r: RunReport| {
            for layer in r.layers.iter_mut() {
                layer.duration_ms = 0;
            }
            r
        };
        assert_eq!(strip(serial), strip(parallel));
    }

    #[test]
    fn passthrough_outside_acceptance_is_a_config_error() {
        let case = Case::new("leaky", ["hi"])
            .unwrap()
            .with_mock_script(vec![ScriptedResponse::Passthrough]);
        let cases = vec![DiscoveredCase::new(case, Layer::Integration, "five")];
        let err = run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap_err();
        assert!(matches!(err, PyramidError::PassthroughOutsideAcceptance { .. }));
        assert!(err.to_string().contains("leaky"));
    }

    #[test]
    fn unknown_agent_is_a_config_error() {
        let case = Case::new("orphan", ["hi"]).unwrap();
        let cases = vec![DiscoveredCase::new(case, Layer::Unit, "nonexistent")];
        let err = run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap_err();
        assert!(matches!(err, PyramidError::UnknownAgent { .. }));
    }

    #[test]
    fn errored_case_reports_turn_and_gates() {
        // Script covers turn 1 only; turn 2 exhausts the mock.
        let case = Case::new("exhausts", ["one", "two"])
            .unwrap()
            .with_mock_script(vec![ScriptedResponse::text(["first"])]);
        let cases = vec![
            DiscoveredCase::new(case, Layer::Unit, "five"),
            passing("i1", Layer::Integration),
        ];
        let report =
            run_pyramid(&cases, &PyramidOptions::default(), &factory).unwrap();
        assert_eq!(report.exit_code, 1);
        assert_eq!(report.gate_stopped_at, Some(Layer::Unit));
        let case_report = &report.layers[0].cases[0];
        assert_eq!(case_report.status, CaseStatus::Errored);
        let error = case_report.error.as_ref().unwrap();
        assert_eq!(error.turn_index, 2);
        assert!(error.message.contains("exhausted"));
    }
}
