//! Wire client for a real model endpoint.
//!
//! The wire contract is deliberately plain: POST the request as JSON,
//! receive an `LlmResponse` as JSON. Endpoint and credentials come from
//! explicit configuration or from `TESTKIT_LLM_ENDPOINT` /
//! `TESTKIT_LLM_API_KEY`. Framework tests never hit the network; this
//! client exists for acceptance-layer suites that record live sessions.

use super::{ClientReply, LlmClient, LlmError, LlmRequest, LlmResponse};

pub const ENDPOINT_ENV: &str = "TESTKIT_LLM_ENDPOINT";
pub const API_KEY_ENV: &str = "TESTKIT_LLM_API_KEY";

pub struct HttpLlmClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpLlmClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpLlmClient {
            endpoint: endpoint.into(),
            api_key,
            agent: ureq::Agent::new_with_defaults(),
        }
    }

    /// Reads `TESTKIT_LLM_ENDPOINT` (required) and `TESTKIT_LLM_API_KEY`
    /// (optional) from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint =
            std::env::var(ENDPOINT_ENV).map_err(|_| LlmError::MissingEndpoint(ENDPOINT_ENV))?;
        let api_key = std::env::var(API_KEY_ENV).ok();
        Ok(HttpLlmClient::new(endpoint, api_key))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl LlmClient for HttpLlmClient {
    fn invoke(&mut self, request: &LlmRequest) -> Result<ClientReply, LlmError> {
        let mut builder = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(request)
            .map_err(|e| LlmError::Http(format!("POST {}: {}", self.endpoint, e)))?;
        let parsed: LlmResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Http(format!("decoding response body: {e}")))?;
        parsed.validate()?;
        Ok(ClientReply { response: parsed, mocked: false })
    }
}
