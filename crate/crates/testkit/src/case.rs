//! Multi-turn test cases.
//!
//! A [`Case`] bundles the user's side of a conversation, the scripted model
//! responses that drive it, and the structural assertions to check
//! afterwards. Running a case against an agent resets the conversation,
//! wires up a fresh scripted client, plays the turns, and evaluates the
//! assertions over the recorded traces.
//!
//! [`Case::with_variants`] clones one case across languages: same script,
//! same assertions, translated user inputs. Structural assertions do not
//! look at reply wording, so a passing case must pass identically in every
//! language.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::Agent;
use crate::expect::{AssertionOutcome, Expect};
use crate::llm::{LlmClient, LlmError, MockLlm, ScriptedResponse};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case name must be non-empty")]
    EmptyName,
    #[error("case needs at least one user input")]
    NoUserInputs,
    #[error("variant {tag:?} has {got} input(s), the base case has {expected}")]
    VariantLengthMismatch { tag: String, expected: usize, got: usize },
    #[error("client factory failed: {0}")]
    ClientFactory(#[from] LlmError),
}

/// Builds the real client a passthrough script item delegates to. The
/// factory runs once per case execution so every run gets a fresh client.
pub type ClientFactory = Arc<dyn Fn() -> Result<Box<dyn LlmClient>, LlmError> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    /// All turns completed and all assertions held.
    Passed,
    /// All turns completed but at least one assertion failed.
    Failed,
    /// A turn aborted (model error, exhausted script, tripped loop guard).
    Errored,
    /// Never ran; an earlier layer failed its gate.
    Skipped,
}

/// Which turn aborted the case and why. Turn indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnFailure {
    pub turn_index: usize,
    pub message: String,
}

/// Tool check: the tool was invoked, optionally with input/output
/// constraints and an exact count. Each present field yields one outcome;
/// `times` counts independently of the other constraints, so
/// `{"tool": "x", "times": 0}` asserts that `x` never ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCheck {
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_subset: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_subset: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InOrderCheck {
    pub in_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplyContainsCheck {
    pub reply_contains: String,
}

/// Declarative assertion, as written in case files. The JSON shape is
/// keyed by which field is present: `{"tool": ...}`, `{"in_order": [...]}`
/// or `{"reply_contains": "..."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseAssertion {
    Tool(ToolCheck),
    InOrder(InOrderCheck),
    ReplyContains(ReplyContainsCheck),
}

impl CaseAssertion {
    /// Evaluates against the completed traces of one case run.
    pub fn evaluate(&self, traces: &[Trace]) -> Vec<AssertionOutcome> {
        match self {
            CaseAssertion::Tool(check) => {
                let mut outcomes = Vec::new();
                if let Some(subset) = &check.input_subset {
                    outcomes.push(
                        Expect::traces(traces)
                            .tool_invocations()
                            .to_include(&check.tool)
                            .with_input(subset)
                            .outcome(),
                    );
                }
                if let Some(subset) = &check.output_subset {
                    outcomes.push(
                        Expect::traces(traces)
                            .tool_invocations()
                            .to_include(&check.tool)
                            .with_output(subset)
                            .outcome(),
                    );
                }
                if let Some(times) = check.times {
                    outcomes
                        .push(Expect::traces(traces).tool_invocations().times(&check.tool, times));
                }
                if outcomes.is_empty() {
                    outcomes.push(
                        Expect::traces(traces).tool_invocations().to_include(&check.tool).outcome(),
                    );
                }
                outcomes
            }
            CaseAssertion::InOrder(check) => {
                vec![Expect::traces(traces).tool_invocations().in_order(check.in_order.clone())]
            }
            CaseAssertion::ReplyContains(check) => {
                vec![Expect::traces(traces).reply_contains(&check.reply_contains)]
            }
        }
    }
}

/// One scripted multi-turn scenario.
#[derive(Clone)]
pub struct Case {
    name: String,
    user_inputs: Vec<String>,
    language_tag: Option<String>,
    script: Vec<ScriptedResponse>,
    client_factory: Option<ClientFactory>,
    assertions: Vec<CaseAssertion>,
}

impl std::fmt::Debug for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Case")
            .field("name", &self.name)
            .field("user_inputs", &self.user_inputs)
            .field("language_tag", &self.language_tag)
            .field("script", &self.script)
            .field("has_client_factory", &self.client_factory.is_some())
            .field("assertions", &self.assertions)
            .finish()
    }
}

impl Case {
    pub fn new<I, S>(name: impl Into<String>, user_inputs: I) -> Result<Self, CaseError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        if name.is_empty() {
            return Err(CaseError::EmptyName);
        }
        let user_inputs: Vec<String> = user_inputs.into_iter().map(Into::into).collect();
        if user_inputs.is_empty() {
            return Err(CaseError::NoUserInputs);
        }
        Ok(Case {
            name,
            user_inputs,
            language_tag: None,
            script: Vec::new(),
            client_factory: None,
            assertions: Vec::new(),
        })
    }

    pub fn with_mock_script(mut self, script: Vec<ScriptedResponse>) -> Self {
        self.script = script;
        self
    }

    /// Needed only when the script contains passthrough items.
    pub fn with_client_factory(mut self, factory: ClientFactory) -> Self {
        self.client_factory = Some(factory);
        self
    }

    pub fn with_assertion(mut self, assertion: CaseAssertion) -> Self {
        self.assertions.push(assertion);
        self
    }

    pub fn with_assertions(mut self, assertions: Vec<CaseAssertion>) -> Self {
        self.assertions = assertions;
        self
    }

    pub fn with_language_tag(mut self, tag: impl Into<String>) -> Self {
        self.language_tag = Some(tag.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn user_inputs(&self) -> &[String] {
        &self.user_inputs
    }

    pub fn language_tag(&self) -> Option<&str> {
        self.language_tag.as_deref()
    }

    pub fn script(&self) -> &[ScriptedResponse] {
        &self.script
    }

    pub fn assertions(&self) -> &[CaseAssertion] {
        &self.assertions
    }

    /// Expands into the base case plus one clone per language: same name
    /// with `-{tag}` appended, translated inputs, identical script and
    /// assertions. Every variant must have as many inputs as the base.
    pub fn with_variants(
        self,
        variants: BTreeMap<String, Vec<String>>,
    ) -> Result<Vec<Case>, CaseError> {
        let mut cases = Vec::with_capacity(1 + variants.len());
        for (tag, inputs) in variants {
            if inputs.len() != self.user_inputs.len() {
                return Err(CaseError::VariantLengthMismatch {
                    tag,
                    expected: self.user_inputs.len(),
                    got: inputs.len(),
                });
            }
            let mut variant = self.clone();
            variant.name = format!("{}-{tag}", self.name);
            variant.user_inputs = inputs;
            variant.language_tag = Some(tag);
            cases.push(variant);
        }
        cases.insert(0, self);
        Ok(cases)
    }

    /// Plays the case against the agent: fresh conversation, fresh scripted
    /// client, one `converse` per user input. A failed turn stops the run
    /// and the case reports as errored; otherwise the assertions decide
    /// between passed and failed.
    pub fn run(&self, agent: &mut Agent) -> Result<CaseResult, CaseError> {
        agent.reset_conversation();
        let mut mock = MockLlm::new();
        if let Some(factory) = &self.client_factory {
            mock = mock.with_real_client(factory()?);
        }
        for item in &self.script {
            mock.add_output(item.clone());
        }
        agent.set_client(Box::new(mock));

        let mut traces = Vec::new();
        let mut failure = None;
        for (index, input) in self.user_inputs.iter().enumerate() {
            match agent.converse(input) {
                Ok(reply) => traces.push(reply.trace),
                Err(e) => {
                    failure =
                        Some(TurnFailure { turn_index: index + 1, message: e.to_string() });
                    break;
                }
            }
        }

        let (assertions, status) = match &failure {
            Some(_) => (Vec::new(), CaseStatus::Errored),
            None => {
                let outcomes: Vec<AssertionOutcome> =
                    self.assertions.iter().flat_map(|a| a.evaluate(&traces)).collect();
                let status = if outcomes.iter().all(|o| o.passed) {
                    CaseStatus::Passed
                } else {
                    CaseStatus::Failed
                };
                (outcomes, status)
            }
        };

        Ok(CaseResult {
            case_name: self.name.clone(),
            language_tag: self.language_tag.clone(),
            conversation_id: agent.conversation_id().as_str().to_string(),
            traces,
            assertions,
            failure,
            status,
        })
    }
}

/// Everything one case run produced. `traces` holds the completed turns
/// only; an aborted turn is described by `failure` instead.
#[derive(Debug)]
pub struct CaseResult {
    pub case_name: String,
    pub language_tag: Option<String>,
    pub conversation_id: String,
    pub traces: Vec<Trace>,
    pub assertions: Vec<AssertionOutcome>,
    pub failure: Option<TurnFailure>,
    pub status: CaseStatus,
}
