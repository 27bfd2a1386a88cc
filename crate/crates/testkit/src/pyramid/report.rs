//! Run reports: one JSON shape for machines, one text shape for humans.
//!
//! The JSON report is canonical and deterministic: rerunning an all-mocked
//! suite must produce byte-identical output except for `duration_ms`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::case::{CaseStatus, TurnFailure};
use crate::expect::AssertionOutcome;

use super::Layer;

/// Terminal-status tally of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    pub skipped: usize,
}

impl Counts {
    pub(crate) fn record(&mut self, status: CaseStatus) {
        match status {
            CaseStatus::Passed => self.passed += 1,
            CaseStatus::Failed => self.failed += 1,
            CaseStatus::Errored => self.errored += 1,
            CaseStatus::Skipped => self.skipped += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.passed + self.failed + self.errored + self.skipped
    }
}

/// Which registered tools a layer's traces exercised. The ratio counts
/// invoked-and-registered over registered and is defined as 1 when the
/// layer's agents register no tools at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCoverage {
    pub registered_tools: Vec<String>,
    pub invoked_tools: Vec<String>,
    pub ratio: f64,
}

impl ToolCoverage {
    pub(crate) fn new(registered: BTreeSet<String>, invoked: BTreeSet<String>) -> Self {
        let hit = invoked.intersection(&registered).count();
        let ratio =
            if registered.is_empty() { 1.0 } else { hit as f64 / registered.len() as f64 };
        ToolCoverage {
            registered_tools: registered.into_iter().collect(),
            invoked_tools: invoked.into_iter().collect(),
            ratio,
        }
    }

    /// Invoked tools that are actually registered, for the `3/5` rendering.
    fn hits(&self) -> usize {
        let registered: BTreeSet<&String> = self.registered_tools.iter().collect();
        self.invoked_tools.iter().filter(|t| registered.contains(t)).count()
    }
}

/// One case's row in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub status: CaseStatus,
    pub assertions: Vec<AssertionOutcome>,
    /// Present only for errored cases: which turn aborted and why.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TurnFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: Layer,
    pub duration_ms: u64,
    pub counts: Counts,
    pub tool_coverage: ToolCoverage,
    pub cases: Vec<CaseReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// 0 all executed cases passed, 1 at least one failed or errored.
    /// Configuration problems abort before a report exists and exit 2.
    pub exit_code: i32,
    /// First layer whose failure prevented later layers from running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_stopped_at: Option<Layer>,
    pub layers: Vec<LayerReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for layer in &self.layers {
            let c = &layer.counts;
            writeln!(
                out,
                "layer {} ({} ms): {} passed, {} failed, {} errored, {} skipped",
                layer.layer, layer.duration_ms, c.passed, c.failed, c.errored, c.skipped
            )
            .unwrap();
            writeln!(
                out,
                "  tool coverage {}/{} ({:.2})",
                layer.tool_coverage.hits(),
                layer.tool_coverage.registered_tools.len(),
                layer.tool_coverage.ratio
            )
            .unwrap();
            for case in &layer.cases {
                let tag = match case.status {
                    CaseStatus::Passed => "pass ",
                    CaseStatus::Failed => "FAIL ",
                    CaseStatus::Errored => "ERROR",
                    CaseStatus::Skipped => "skip ",
                };
                writeln!(out, "  {tag} {}", case.name).unwrap();
                for outcome in case.assertions.iter().filter(|o| !o.passed) {
                    writeln!(out, "        failed: {}", outcome.expectation).unwrap();
                    writeln!(out, "        {}", outcome.detail).unwrap();
                }
                if let Some(error) = &case.error {
                    writeln!(out, "        turn {}: {}", error.turn_index, error.message)
                        .unwrap();
                }
            }
        }
        if let Some(layer) = self.gate_stopped_at {
            writeln!(out, "gate stopped at layer: {layer}").unwrap();
        }
        writeln!(out, "exit code: {}", self.exit_code).unwrap();
        out
    }
}
