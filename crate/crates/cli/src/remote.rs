//! Completion client for a remote model endpoint.
//!
//! Request: `POST <url>` with `Authorization: Bearer <token>` and body
//! `{"prompt": ..., "max_tokens": N}`. The first generated text is read from
//! `{"text": ...}` or from `{"choices": [{"text": ...}]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use instructbias_core::evalharness::{ClientError, ClientLimits, ModelClient};

pub const TOKEN_ENV: &str = "INSTRUCTBIAS_API_TOKEN";

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: Option<String>,
    #[serde(default)]
    choices: Vec<Choice>,
}

pub struct RemoteClient {
    url: String,
    token: Option<String>,
    limits: ClientLimits,
    agent: Agent,
}

impl RemoteClient {
    pub fn new(url: impl Into<String>, token: Option<String>, limits: ClientLimits) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteClient { url: url.into(), token: token.filter(|t| !t.is_empty()), limits, agent }
    }

    /// Reads the bearer token from [`TOKEN_ENV`].
    pub fn from_env(url: impl Into<String>, limits: ClientLimits) -> Self {
        RemoteClient::new(url, std::env::var(TOKEN_ENV).ok(), limits)
    }
}

impl ModelClient for RemoteClient {
    fn name(&self) -> &str {
        "remote"
    }

    fn limits(&self) -> ClientLimits {
        self.limits
    }

    fn check_available(&self) -> Result<(), ClientError> {
        if self.token.is_none() {
            return Err(ClientError::Unavailable(format!("{TOKEN_ENV} is not set")));
        }
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(ClientError::Unavailable(format!("not an http(s) url: {}", self.url)));
        }
        Ok(())
    }

    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, ClientError> {
        let token = self.token.as_deref().ok_or_else(|| ClientError::Unavailable(format!("{TOKEN_ENV} is not set")))?;
        let sent = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(CompletionRequest { prompt, max_tokens: max_output_tokens });
        let mut response = match sent {
            Ok(r) => r,
            Err(e @ (ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Err(ClientError::Unavailable(e.to_string()))
            }
            Err(e) => return Err(ClientError::Request(e.to_string())),
        };
        let status = response.status();
        if status == 401 || status == 403 {
            return Err(ClientError::Unavailable(format!("rejected credentials ({status})")));
        }
        if !status.is_success() {
            return Err(ClientError::Request(format!("status {status}")));
        }
        let body: CompletionResponse =
            response.body_mut().read_json().map_err(|e| ClientError::Request(format!("bad response body: {e}")))?;
        body.text
            .or_else(|| body.choices.into_iter().next().map(|c| c.text))
            .ok_or_else(|| ClientError::Request("response has no generated text".into()))
    }
}
