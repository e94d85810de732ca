//! JSON-over-HTTP completion client.
//!
//! Requests are `POST {"prompt": "..."}`; the response body is a JSON object
//! whose fields depend on the caller (`{"text": ...}` for paraphrasing,
//! `{"score": ...}` for judging).

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Environment variable holding the bearer token sent to the endpoint.
pub const AUTH_TOKEN_ENV: &str = "OCTAV_LLM_TOKEN";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {endpoint} failed: {message}")]
    Transport { endpoint: String, message: String },
    #[error("response is missing field `{0}` or it has the wrong type")]
    MissingField(&'static str),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<Value, ClientError>;
}

/// Send `prompt` and return the `text` field of the response.
pub fn complete_text(client: &dyn CompletionClient, prompt: &str) -> Result<String, ClientError> {
    client
        .complete(prompt)?
        .get("text")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or(ClientError::MissingField("text"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientConfig {
    pub endpoint: String,
    pub auth_token: Option<String>,
    pub timeout: Duration,
}

impl ClientConfig {
    /// Endpoint with the token taken from [`AUTH_TOKEN_ENV`] if set.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_token: std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct PromptBody<'a> {
    prompt: &'a str,
}

pub struct HttpClient {
    config: ClientConfig,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    fn transport(&self, err: impl std::fmt::Display) -> ClientError {
        ClientError::Transport {
            endpoint: self.config.endpoint.clone(),
            message: err.to_string(),
        }
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, prompt: &str) -> Result<Value, ClientError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(PromptBody { prompt })
            .map_err(|e| self.transport(e))?;
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
        if !value.is_object() {
            return Err(ClientError::InvalidResponse(format!(
                "expected a JSON object, got {value}"
            )));
        }
        Ok(value)
    }
}
