//! Structural testing for tool-calling LLM agents.
//!
//! The premise: you cannot assert on free-form model text, but you can
//! assert on what the agent *did*. Every agent turn is recorded as a trace
//! of typed spans (LLM invocations, tool invocations), the model is
//! replaced by a scripted mock so runs are deterministic, and assertions
//! are written against the trace structure: which tools ran, with which
//! arguments, in which order.
//!
//! The pieces, bottom to top:
//!
//! - [`trace`]: span and trace model plus a canonical JSONL wire format
//! - [`store`]: in-memory trace collector with export/import
//! - [`llm`]: client abstraction, scripted mock, record/replay
//! - [`agent`]: minimal tool-calling agent loop that emits traces
//! - [`expect`]: fluent structural assertions over recorded traces
//! - [`case`]: multi-turn test cases, language variants, declarative assertions
//! - [`pyramid`]: layered unit/integration/acceptance runner with fail-fast gating
//! - [`fixtures`]: small seeded sample agents for the shipped test corpus
//! - [`docs`]: consistency checks for the scenario documentation
//!
//! ```no_run
//! use serde_json::json;
//! use testkit::case::Case;
//! use testkit::expect::Expect;
//! use testkit::fixtures;
//! use testkit::llm::ScriptedResponse;
//!
//! let mut agent = fixtures::driver_assistance_agent();
//! let case = Case::new("update-phone", ["My new number is +555-98765"])
//!     .unwrap()
//!     .with_mock_script(vec![
//!         ScriptedResponse::tool_use([(
//!             "update_customer_information",
//!             json!({"ucid": "1", "phoneNr": "+555-98765"}),
//!         )]),
//!         ScriptedResponse::text(["Done."]),
//!     ]);
//! let result = case.run(&mut agent).unwrap();
//! Expect::traces(&result.traces)
//!     .tool_invocations()
//!     .to_include("update_customer_information")
//!     .with_input(&json!({"phoneNr": "+555-98765"}))
//!     .assert();
//! ```

pub mod agent;
pub mod case;
pub mod cli;
pub mod docs;
pub mod expect;
pub mod fixtures;
pub mod llm;
pub mod pyramid;
pub mod store;
pub mod trace;
