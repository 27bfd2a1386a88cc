//! Agent configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid agent config: {0}")]
    Invalid(String),
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config file: {0}")]
    Parse(#[from] serde_json::Error),
}

fn default_max_iterations() -> usize {
    10
}

/// Settings for reaching a live model endpoint. Optional: scripted and
/// replayed runs never need one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub system_prompt: String,
    /// Upper bound on model invocations within a single turn. The guard
    /// trips when the model still wants tools on the final allowed call.
    #[serde(default = "default_max_iterations")]
    pub max_iterations_per_turn: usize,
    /// Execute a multi-tool response on worker threads instead of serially.
    #[serde(default)]
    pub parallel_tools: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmEndpointConfig>,
}

impl AgentConfig {
    pub fn new(system_prompt: impl Into<String>) -> Self {
        AgentConfig {
            system_prompt: system_prompt.into(),
            max_iterations_per_turn: default_max_iterations(),
            parallel_tools: false,
            llm: None,
        }
    }

    pub fn with_max_iterations(mut self, max: usize) -> Self {
        self.max_iterations_per_turn = max;
        self
    }

    pub fn with_parallel_tools(mut self, parallel: bool) -> Self {
        self.parallel_tools = parallel;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations_per_turn == 0 {
            return Err(ConfigError::Invalid(
                "max_iterations_per_turn must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: AgentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
