use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::ChatMessage;

pub const API_KEY_ENV: &str = "UAT_COPILOT_API_KEY";
pub const API_URL_ENV: &str = "UAT_COPILOT_API_URL";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("no scripted response for {0}")]
    MissingResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response body: {0}")]
    BadBody(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Identifies one model call inside a suite run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranscriptKey {
    pub case: String,
    pub step: usize,
    pub agent: String,
    pub attempt: usize,
}

impl std::fmt::Display for TranscriptKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/step {}/{}/attempt {}", self.case, self.step, self.agent, self.attempt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub key: TranscriptKey,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: TranscriptKey,
    pub response: String,
}

/// The backbone model. Must be callable from several sessions at once.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

pub fn load_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptEntry>, BackendError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| BackendError::Config(format!("cannot read transcript {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| BackendError::Config(format!("malformed transcript {}: {e}", path.display())))
}

/// Replays keyed responses. Every request is logged for inspection.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: HashMap<TranscriptKey, String>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    /// Later entries win when keys repeat.
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self {
            responses: entries.into_iter().map(|e| (e.key, e.response)).collect(),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(Self::new(load_transcript(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.requests.lock().expect("request log poisoned").push(request.clone());
        self.responses
            .get(&request.key)
            .cloned()
            .ok_or_else(|| BackendError::MissingResponse(request.key.to_string()))
    }
}

/// Chat-completion client over HTTP.
#[derive(Debug)]
pub struct HttpBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { url: url.into(), model: model.into(), api_key, client })
    }

    /// Reads the endpoint and token from the environment.
    pub fn from_env(model: impl Into<String>) -> Result<Self, BackendError> {
        let url = std::env::var(API_URL_ENV)
            .map_err(|_| BackendError::Config(format!("{API_URL_ENV} is not set")))?;
        Self::new(url, model, std::env::var(API_KEY_ENV).ok())
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": 0,
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| BackendError::BadBody(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::BadBody("missing choices[0].message.content".into()))
    }
}

/// Passes calls through to `inner` and keeps every successful exchange as a
/// transcript entry.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded entries sorted by key, so concurrent sessions record stably.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let mut entries = self.entries.lock().expect("transcript poisoned").clone();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        entries
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(&self.entries()).expect("entries serialize");
        std::fs::write(path, json + "\n")
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        self.entries
            .lock()
            .expect("transcript poisoned")
            .push(TranscriptEntry { key: request.key.clone(), response: response.clone() });
        Ok(response)
    }
}
