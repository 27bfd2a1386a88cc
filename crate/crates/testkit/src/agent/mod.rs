//! Tool-calling agent core.
//!
//! [`Agent`] owns the conversation memory, the tool registry, a swappable
//! model client, and a trace collector. Every [`Agent::converse`] call runs
//! one full turn of the invoke/execute loop and returns the reply together
//! with the finished trace.

mod config;
mod memory;
mod tool;

pub use config::{AgentConfig, ConfigError, LlmEndpointConfig};
pub use memory::ConversationMemory;
pub use tool::{ParamType, ParameterSchema, ToolError, ToolHandler, ToolRegistry, ToolSpec};

use serde_json::{json, Value};
use thiserror::Error;

use crate::llm::{
    ContentBlock, LlmClient, LlmError, LlmRequest, Message, StopReason,
};
use crate::store::{ConversationId, StoreError, TraceCollector, TurnHandle};
use crate::trace::{attr, canonical_json, MalformedSpan, SpanKind, SpanStatus, Trace};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no model client is configured")]
    NoClient,
    #[error("loop guard tripped after {max_iterations} model invocation(s): the model still requested tools")]
    LoopGuardTripped { max_iterations: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Span(#[from] MalformedSpan),
    #[error("memory import failed: {0}")]
    MemoryImport(#[source] serde_json::Error),
}

/// What one turn produced: the assistant's visible reply and the trace of
/// everything that happened to produce it.
#[derive(Debug, Clone)]
pub struct AgentReply {
    pub text: String,
    pub trace: Trace,
}

pub struct Agent {
    config: AgentConfig,
    registry: ToolRegistry,
    memory: ConversationMemory,
    conversation_id: ConversationId,
    client: Option<Box<dyn LlmClient>>,
    collector: TraceCollector,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Self, AgentError> {
        Self::with_collector(config, TraceCollector::new())
    }

    pub fn with_collector(
        config: AgentConfig,
        collector: TraceCollector,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        let conversation_id = ConversationId::random();
        Ok(Agent {
            config,
            registry: ToolRegistry::new(),
            memory: ConversationMemory::new(&conversation_id),
            conversation_id,
            client: None,
            collector,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn collector(&self) -> &TraceCollector {
        &self.collector
    }

    pub fn conversation_id(&self) -> &ConversationId {
        &self.conversation_id
    }

    pub fn memory(&self) -> &ConversationMemory {
        &self.memory
    }

    pub fn register_tool(&mut self, spec: ToolSpec, handler: ToolHandler) -> Result<(), AgentError> {
        self.registry.register(spec, handler)?;
        Ok(())
    }

    pub fn tool_specs(&self) -> Vec<ToolSpec> {
        self.registry.specs()
    }

    pub fn registered_tools(&self) -> Vec<String> {
        self.registry.names()
    }

    pub fn set_client(&mut self, client: Box<dyn LlmClient>) {
        self.client = Some(client);
    }

    /// Runs a registered tool directly, without a model turn and without
    /// tracing. Meant for probing fixture behavior in tests.
    pub fn execute_tool(&self, name: &str, input: &Value) -> Result<Value, ToolError> {
        self.registry.execute(name, input)
    }

    pub fn clear_client(&mut self) {
        self.client = None;
    }

    /// Starts over with a fresh random conversation id and empty memory.
    /// Already-collected traces stay in the collector.
    pub fn reset_conversation(&mut self) {
        self.reset_conversation_with(ConversationId::random());
    }

    pub fn reset_conversation_with(&mut self, conversation_id: ConversationId) {
        self.memory = ConversationMemory::new(&conversation_id);
        self.conversation_id = conversation_id;
    }

    pub fn export_memory(&self) -> String {
        self.memory.export_json()
    }

    /// Restores a frozen conversation. The agent adopts the imported
    /// conversation id so follow-up turns land in the same conversation.
    pub fn import_memory(&mut self, text: &str) -> Result<(), AgentError> {
        let memory = ConversationMemory::import_json(text).map_err(AgentError::MemoryImport)?;
        self.conversation_id = ConversationId::new(memory.conversation_id())
            .map_err(AgentError::Store)?;
        self.memory = memory;
        Ok(())
    }

    /// Runs one user turn: repeatedly invokes the model, executes requested
    /// tools, and stops when the model ends its turn or the iteration guard
    /// trips. Every model call and tool execution lands in the trace.
    pub fn converse(&mut self, user_input: &str) -> Result<AgentReply, AgentError> {
        if self.client.is_none() {
            return Err(AgentError::NoClient);
        }
        let handle = self.collector.begin_turn(&self.conversation_id, user_input)?;
        self.memory.append(Message::user(user_input));

        let max = self.config.max_iterations_per_turn;
        for invocation in 1..=max {
            let request = match LlmRequest::new(
                self.config.system_prompt.clone(),
                self.memory.messages().to_vec(),
                self.registry.specs(),
            ) {
                Ok(request) => request,
                Err(e) => return Err(abort(&handle, e.into())),
            };

            let llm_start = handle.now();
            let reply = match self.client.as_mut().expect("checked above").invoke(&request) {
                Ok(reply) => reply,
                Err(e) => return Err(abort(&handle, e.into())),
            };
            let llm_end = handle.now();
            if let Err(e) = reply.response.validate() {
                return Err(abort(&handle, e.into()));
            }

            let llm_span = handle
                .child_span(SpanKind::LlmInvocation, "llm.invoke")
                .start_time(llm_start)
                .end_time(llm_end)
                .attribute(attr::LLM_STOP_REASON, reply.response.stop_reason.as_str())
                .attribute(attr::LLM_MOCKED, reply.mocked)
                .build();
            match llm_span {
                Ok(span) => {
                    if let Err(e) = handle.emit(span) {
                        return Err(abort(&handle, e.into()));
                    }
                }
                Err(e) => return Err(abort(&handle, e.into())),
            }

            match reply.response.stop_reason {
                StopReason::EndTurn => {
                    let text = reply.response.text();
                    self.memory.append(Message::assistant(reply.response.content));
                    let trace = handle.end(&text)?;
                    return Ok(AgentReply { text, trace });
                }
                StopReason::ToolUse => {
                    if invocation == max {
                        // Final allowed invocation still wants tools: stop
                        // without executing them so the turn cannot grow.
                        let err = AgentError::LoopGuardTripped { max_iterations: max };
                        return Err(abort(&handle, err));
                    }
                    self.memory.append(Message::assistant(reply.response.content.clone()));
                    let requests: Vec<(String, String, Value)> = reply
                        .response
                        .tool_uses()
                        .into_iter()
                        .map(|(id, name, input)| {
                            (id.to_string(), name.to_string(), input.clone())
                        })
                        .collect();
                    let results = match self.run_tools(&handle, invocation, &requests) {
                        Ok(results) => results,
                        Err(e) => return Err(abort(&handle, e)),
                    };
                    self.memory.append(Message::tool_results(results));
                }
            }
        }
        unreachable!("the loop guard returns before iterations run out")
    }

    /// Executes one response's tool requests, serially or on worker
    /// threads, and emits one tool span per execution. Results come back
    /// as tool_result blocks in the response's block order regardless of
    /// completion order. Tool failures do not abort the turn: they become
    /// error spans and `is_error` results for the model to react to.
    fn run_tools(
        &self,
        handle: &TurnHandle,
        invocation: usize,
        requests: &[(String, String, Value)],
    ) -> Result<Vec<ContentBlock>, AgentError> {
        let parallel = self.config.parallel_tools && requests.len() > 1;
        let group = parallel.then(|| format!("g{invocation}"));

        let mut executions: Vec<ToolExecution> = if parallel {
            std::thread::scope(|scope| {
                let joins: Vec<_> = requests
                    .iter()
                    .map(|(_, name, input)| {
                        let registry = &self.registry;
                        scope.spawn(move || {
                            let start = handle.now();
                            let result = registry.execute(name, input);
                            let end = handle.now();
                            (start, end, result)
                        })
                    })
                    .collect();
                joins
                    .into_iter()
                    .zip(requests)
                    .map(|(join, (id, name, input))| {
                        let (start, end, result) = join.join().expect("tool thread panicked");
                        ToolExecution {
                            tool_use_id: id.clone(),
                            name: name.clone(),
                            input: input.clone(),
                            start,
                            end,
                            result,
                        }
                    })
                    .collect()
            })
        } else {
            requests
                .iter()
                .map(|(id, name, input)| {
                    let start = handle.now();
                    let result = self.registry.execute(name, input);
                    let end = handle.now();
                    ToolExecution {
                        tool_use_id: id.clone(),
                        name: name.clone(),
                        input: input.clone(),
                        start,
                        end,
                        result,
                    }
                })
                .collect()
        };
        executions.sort_by_key(|e| e.start);

        for execution in &executions {
            let (output, failed) = match &execution.result {
                Ok(value) => (value.clone(), false),
                Err(e) => (json!({ "error": e.to_string() }), true),
            };
            let mut builder = handle
                .child_span(SpanKind::ToolInvocation, format!("tool.{}", execution.name))
                .start_time(execution.start)
                .end_time(execution.end)
                .attribute(attr::TOOL_NAME, execution.name.as_str())
                .attribute(attr::TOOL_INPUT, canonical_json(&execution.input))
                .attribute(attr::TOOL_OUTPUT, canonical_json(&output));
            if failed {
                builder = builder.status(SpanStatus::Error);
            }
            if let Some(label) = &group {
                builder = builder.attribute(attr::TOOL_GROUP, label.as_str());
            }
            handle.emit(builder.build()?)?;
        }

        Ok(requests
            .iter()
            .map(|(id, _, _)| {
                let execution = executions
                    .iter()
                    .find(|e| &e.tool_use_id == id)
                    .expect("every request was executed");
                let (output, is_error) = match &execution.result {
                    Ok(value) => (value.clone(), false),
                    Err(e) => (json!({ "error": e.to_string() }), true),
                };
                ContentBlock::ToolResult { tool_use_id: id.clone(), output, is_error }
            })
            .collect())
    }
}

struct ToolExecution {
    tool_use_id: String,
    name: String,
    input: Value,
    start: i64,
    end: i64,
    result: Result<Value, ToolError>,
}

/// Ends the turn as errored (best effort) and passes the error through.
fn abort(handle: &TurnHandle, err: AgentError) -> AgentError {
    let _ = handle.end_with_error(&err.to_string());
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockLlm, ScriptedResponse};
    use serde_json::json;
    use std::sync::Arc;

    fn echo_agent() -> Agent {
        let mut agent = Agent::new(AgentConfig::new("You are a test agent.")).unwrap();
        agent
            .register_tool(
                ToolSpec::new(
                    "echo",
                    "echoes its input",
                    ParameterSchema::new([("value", ParamType::String)], ["value"]).unwrap(),
                )
                .unwrap(),
                Arc::new(|input| Ok(json!({ "echoed": input["value"] }))),
            )
            .unwrap();
        agent
    }

    fn script(items: Vec<ScriptedResponse>) -> Box<MockLlm> {
        let mut mock = MockLlm::new();
        for item in items {
            mock.add_output(item);
        }
        Box::new(mock)
    }

    #[test]
    fn text_only_turn_has_root_and_llm_span() {
        let mut agent = echo_agent();
        agent.set_client(script(vec![ScriptedResponse::text(["Hello there."])]));
        let reply = agent.converse("Hi").unwrap();
        assert_eq!(reply.text, "Hello there.");
        assert_eq!(reply.trace.spans().len(), 2);
        assert_eq!(reply.trace.root().status(), SpanStatus::Ok);
        assert_eq!(reply.trace.agent_reply(), "Hello there.");
        let llm_spans: Vec<_> = reply.trace.spans_of_kind(SpanKind::LlmInvocation).collect();
        assert_eq!(llm_spans.len(), 1);
        assert_eq!(
            llm_spans[0].attr(attr::LLM_MOCKED).and_then(crate::trace::AttrValue::as_bool),
            Some(true)
        );
    }

    #[test]
    fn tool_turn_emits_tool_span_and_feeds_result_back() {
        let mut agent = echo_agent();
        agent.set_client(script(vec![
            ScriptedResponse::tool_use([("echo", json!({"value": "ping"}))]),
            ScriptedResponse::text(["The echo returned ping."]),
        ]));
        let reply = agent.converse("Echo ping, please").unwrap();
        assert_eq!(reply.trace.spans().len(), 4);

        let tool_spans: Vec<_> = reply.trace.spans_of_kind(SpanKind::ToolInvocation).collect();
        assert_eq!(tool_spans.len(), 1);
        assert_eq!(tool_spans[0].name(), "tool.echo");
        assert_eq!(
            tool_spans[0].attr_str(attr::TOOL_OUTPUT),
            Some(r#"{"echoed":"ping"}"#)
        );
        assert!(tool_spans[0].attr(attr::TOOL_GROUP).is_none());

        // Tool result flowed back into memory as the third message.
        let messages = agent.memory().messages();
        assert_eq!(messages.len(), 4);
        assert!(matches!(
            &messages[2].content[0],
            ContentBlock::ToolResult { is_error: false, .. }
        ));
    }

    #[test]
    fn unknown_tool_becomes_error_result_and_turn_continues() {
        let mut agent = echo_agent();
        agent.set_client(script(vec![
            ScriptedResponse::tool_use([("missing_tool", json!({}))]),
            ScriptedResponse::text(["I could not find that tool."]),
        ]));
        let reply = agent.converse("Use a tool I do not have").unwrap();
        assert_eq!(reply.text, "I could not find that tool.");

        let tool_spans: Vec<_> = reply.trace.spans_of_kind(SpanKind::ToolInvocation).collect();
        assert_eq!(tool_spans.len(), 1);
        assert_eq!(tool_spans[0].status(), SpanStatus::Error);
        assert!(tool_spans[0].attr_str(attr::TOOL_OUTPUT).unwrap().contains("unknown tool"));

        let messages = agent.memory().messages();
        assert!(matches!(
            &messages[2].content[0],
            ContentBlock::ToolResult { is_error: true, .. }
        ));
    }

    #[test]
    fn loop_guard_trips_without_executing_final_tools() {
        let mut agent = Agent::new(
            AgentConfig::new("You are a test agent.").with_max_iterations(3),
        )
        .unwrap();
        agent
            .register_tool(
                ToolSpec::new("noop", "does nothing", ParameterSchema::empty()).unwrap(),
                Arc::new(|_| Ok(json!({}))),
            )
            .unwrap();
        agent.set_client(script(vec![
            ScriptedResponse::tool_use([("noop", json!({}))]),
            ScriptedResponse::tool_use([("noop", json!({}))]),
            ScriptedResponse::tool_use([("noop", json!({}))]),
        ]));

        let err = agent.converse("Loop forever").unwrap_err();
        assert!(matches!(err, AgentError::LoopGuardTripped { max_iterations: 3 }));

        let snapshot = agent.collector().snapshot();
        assert_eq!(snapshot.len(), 1);
        let trace = &snapshot.traces()[0];
        assert_eq!(trace.root().status(), SpanStatus::Error);
        assert_eq!(trace.agent_reply(), "");
        assert_eq!(trace.spans_of_kind(SpanKind::LlmInvocation).count(), 3);
        // Two executed rounds, none from the tripping response.
        assert_eq!(trace.spans_of_kind(SpanKind::ToolInvocation).count(), 2);
        assert!(trace.root().attr_str(attr::TURN_ERROR).unwrap().contains("loop guard"));
    }

    #[test]
    fn parallel_tools_share_a_group_label_and_keep_block_order() {
        let mut agent = Agent::new(
            AgentConfig::new("You are a test agent.").with_parallel_tools(true),
        )
        .unwrap();
        for name in ["alpha", "beta"] {
            let marker = name.to_string();
            agent
                .register_tool(
                    ToolSpec::new(name, "returns its own name", ParameterSchema::empty())
                        .unwrap(),
                    Arc::new(move |_| Ok(json!({ "tool": marker }))),
                )
                .unwrap();
        }
        agent.set_client(script(vec![
            ScriptedResponse::tool_use([("beta", json!({})), ("alpha", json!({}))]),
            ScriptedResponse::text(["Both ran."]),
        ]));

        let reply = agent.converse("Run both").unwrap();
        let tool_spans: Vec<_> = reply.trace.spans_of_kind(SpanKind::ToolInvocation).collect();
        assert_eq!(tool_spans.len(), 2);
        for span in &tool_spans {
            assert_eq!(span.attr_str(attr::TOOL_GROUP), Some("g1"));
        }

        // tool_result blocks come back in the response's block order:
        // beta first, then alpha, whatever order the threads finished in.
        let messages = agent.memory().messages();
        let results = &messages[2].content;
        assert_eq!(results.len(), 2);
        match (&results[0], &results[1]) {
            (
                ContentBlock::ToolResult { output: first, .. },
                ContentBlock::ToolResult { output: second, .. },
            ) => {
                assert_eq!(first["tool"], "beta");
                assert_eq!(second["tool"], "alpha");
            }
            other => panic!("expected two tool results, got {other:?}"),
        }
    }

    #[test]
    fn client_error_ends_turn_as_errored() {
        let mut agent = echo_agent();
        agent.set_client(Box::new(MockLlm::new()));
        let err = agent.converse("Anything").unwrap_err();
        assert!(matches!(err, AgentError::Llm(LlmError::MockExhausted { .. })));
        assert!(err.to_string().contains("Anything"));

        let snapshot = agent.collector().snapshot();
        assert_eq!(snapshot.len(), 1);
        assert_eq!(snapshot.traces()[0].root().status(), SpanStatus::Error);
    }

    #[test]
    fn no_client_fails_before_opening_a_turn() {
        let mut agent = echo_agent();
        let err = agent.converse("Hi").unwrap_err();
        assert!(matches!(err, AgentError::NoClient));
        assert!(agent.collector().snapshot().is_empty());
    }

    #[test]
    fn memory_import_adopts_conversation_id() {
        let mut agent = echo_agent();
        agent.set_client(script(vec![ScriptedResponse::text(["First reply."])]));
        agent.converse("First").unwrap();
        let exported = agent.export_memory();
        let original_id = agent.conversation_id().clone();

        let mut other = echo_agent();
        other.import_memory(&exported).unwrap();
        assert_eq!(other.conversation_id(), &original_id);
        assert_eq!(other.memory().len(), 2);

        other.set_client(script(vec![ScriptedResponse::text(["Second reply."])]));
        let reply = other.converse("Second").unwrap();
        assert_eq!(reply.trace.conversation_id(), original_id.as_str());
        // The resumed turn saw the imported history plus the new input.
        assert_eq!(other.memory().len(), 4);
    }

    #[test]
    fn multi_turn_conversation_keeps_one_id_across_traces() {
        let mut agent = echo_agent();
        agent.set_client(script(vec![
            ScriptedResponse::text(["One."]),
            ScriptedResponse::text(["Two."]),
        ]));
        agent.converse("First").unwrap();
        agent.converse("Second").unwrap();

        let snapshot = agent.collector().snapshot();
        assert_eq!(snapshot.len(), 2);
        let ids: Vec<&str> =
            snapshot.traces().iter().map(|t| t.conversation_id()).collect();
        assert_eq!(ids[0], ids[1]);
        assert_ne!(snapshot.traces()[0].trace_id(), snapshot.traces()[1].trace_id());
        assert_eq!(snapshot.traces()[0].user_input(), "First");
        assert_eq!(snapshot.traces()[1].user_input(), "Second");
    }
}
