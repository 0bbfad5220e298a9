//! Model client contract and the in-tree mock clients.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("request failed: {0}")]
    Request(String),
    #[error("no recorded generation for prompt {0}")]
    NotRecorded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientLimits {
    pub max_concurrent: usize,
    pub requests_per_minute: Option<u32>,
}

impl Default for ClientLimits {
    fn default() -> Self {
        ClientLimits { max_concurrent: 8, requests_per_minute: None }
    }
}

/// A text-generation backend.
pub trait ModelClient: Send + Sync {
    fn name(&self) -> &str;

    fn limits(&self) -> ClientLimits {
        ClientLimits::default()
    }

    /// Called once before a run issues any request.
    fn check_available(&self) -> Result<(), ClientError> {
        Ok(())
    }

    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, ClientError>;
}

const INPUT_MARKER: &str = "Now complete the following example\u{2014}\ninput: ";
const OUTPUT_MARKER: &str = "\noutput:";

/// Recovers the instance input from an assembled prompt.
pub fn extract_instance_input(prompt: &str) -> Option<&str> {
    let start = prompt.rfind(INPUT_MARKER)? + INPUT_MARKER.len();
    let rest = &prompt[start..];
    rest.strip_suffix(OUTPUT_MARKER).or_else(|| rest.rfind(OUTPUT_MARKER).map(|end| &rest[..end]))
}

/// Answers with the instance input.
#[derive(Debug, Clone, Default)]
pub struct EchoClient;

impl ModelClient for EchoClient {
    fn name(&self) -> &str {
        "echo"
    }

    fn complete(&self, prompt: &str, _max_output_tokens: usize) -> Result<String, ClientError> {
        extract_instance_input(prompt)
            .map(str::to_string)
            .ok_or_else(|| ClientError::Request("prompt has no instance slot".to_string()))
    }
}

/// Answers every prompt with the same text.
#[derive(Debug, Clone)]
pub struct ConstantClient {
    text: String,
}

impl ConstantClient {
    pub fn new(text: impl Into<String>) -> Self {
        ConstantClient { text: text.into() }
    }
}

impl ModelClient for ConstantClient {
    fn name(&self) -> &str {
        "constant"
    }

    fn complete(&self, _prompt: &str, _max_output_tokens: usize) -> Result<String, ClientError> {
        Ok(self.text.clone())
    }
}

/// Lowercase hex SHA-256 of the prompt.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub instance_id: String,
    pub prompt_hash: String,
    pub generation: String,
}

/// Serves recorded generations keyed by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    by_hash: BTreeMap<String, String>,
}

impl ReplayClient {
    pub fn new(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        ReplayClient { by_hash: records.into_iter().map(|r| (r.prompt_hash, r.generation)).collect() }
    }

    /// Parses JSON lines; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, ClientError> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<ReplayRecord>(l)
                    .map_err(|e| ClientError::Unavailable(format!("replay line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ReplayClient::new(records))
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }

    pub fn to_jsonl(records: &[ReplayRecord]) -> String {
        records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

impl ModelClient for ReplayClient {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &str, _max_output_tokens: usize) -> Result<String, ClientError> {
        let hash = prompt_hash(prompt);
        self.by_hash.get(&hash).cloned().ok_or(ClientError::NotRecorded(hash))
    }
}
