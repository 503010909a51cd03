use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion { text: text.into(), latency_ms: 0, prompt_tokens: None, completion_tokens: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no replay fixture for prompt digest {digest}")]
    MissingFixture { digest: String },
    #[error("fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("scripted backend exhausted")]
    Exhausted,
}

impl BackendError {
    fn is_transient(&self) -> bool {
        match self {
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            BackendError::Transport(_) => true,
            _ => false,
        }
    }
}

/// A text-completion service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    /// Stable description recorded in transcripts.
    fn descriptor(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<Completion, BackendError>;
}

/// Normalizes line endings and trailing whitespace so that a prompt's key
/// does not depend on the platform that rendered it.
pub fn canonicalize_prompt(prompt: &str) -> String {
    let unified = prompt.replace("\r\n", "\n");
    let mut out: String = unified.lines().map(|l| l.trim_end()).collect::<Vec<_>>().join("\n");
    let trimmed = out.trim_end_matches('\n').len();
    out.truncate(trimmed);
    out
}

/// Replay key: hex SHA-256 of the canonicalized prompt.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(canonicalize_prompt(prompt).as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub fixture_path: Option<PathBuf>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout: Duration,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_base: Duration,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl BackendConfig {
    pub fn live(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Live,
            endpoint: Some(endpoint.into()),
            model_name: Some(model_name.into()),
            ..Self::base(BackendKind::Live)
        }
    }

    pub fn replay(fixture_path: impl Into<PathBuf>) -> Self {
        BackendConfig { fixture_path: Some(fixture_path.into()), ..Self::base(BackendKind::Replay) }
    }

    fn base(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            endpoint: None,
            model_name: None,
            fixture_path: None,
            temperature: 0.0,
            max_output_tokens: 2048,
            timeout: Duration::from_secs(120),
            retries: 3,
            backoff_base: Duration::from_millis(250),
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::Live => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("live backend needs an endpoint".into()));
                }
                if self.model_name.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("live backend needs a model name".into()));
                }
            }
            BackendKind::Replay => {
                if self.fixture_path.is_none() {
                    return Err(BackendError::Config("replay backend needs a fixture path".into()));
                }
            }
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::Config(format!("temperature {} is not a nonnegative number", self.temperature)));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Live => Box::new(LiveBackend::new(self.clone())),
            BackendKind::Replay => Box::new(ReplayBackend::load(self.fixture_path.as_ref().expect("validated"))?),
        })
    }
}

// ---------------------------------------------------------------------------

/// Chat-completion client over HTTP.
pub struct LiveBackend {
    config: BackendConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

impl LiveBackend {
    pub fn new(config: BackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LiveBackend { config, agent }
    }

    fn attempt(&self, prompt: &str) -> Result<Completion, BackendError> {
        let endpoint = self.config.endpoint.as_deref().expect("validated");
        let body = ChatRequest {
            model: self.config.model_name.as_deref().expect("validated"),
            messages: [ChatMessage { role: "user", content: prompt }],
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
        };
        let mut req = self.agent.post(endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let start = Instant::now();
        let payload = serde_json::to_string(&body).expect("serializable");
        let mut resp = req
            .header("Content-Type", "application/json")
            .send(payload.as_str())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        let latency_ms = start.elapsed().as_millis() as u64;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: text.chars().take(500).collect() });
        }
        let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = json
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))?;
        let usage = |k: &str| json.pointer(&format!("/usage/{k}")).and_then(|v| v.as_u64());
        Ok(Completion {
            text: content.to_string(),
            latency_ms,
            prompt_tokens: usage("prompt_tokens"),
            completion_tokens: usage("completion_tokens"),
        })
    }
}

impl Backend for LiveBackend {
    fn descriptor(&self) -> String {
        format!(
            "live:{}@{}",
            self.config.model_name.as_deref().unwrap_or(""),
            self.config.endpoint.as_deref().unwrap_or("")
        )
    }

    fn complete(&self, prompt: &str) -> Result<Completion, BackendError> {
        let mut delay = self.config.backoff_base;
        let mut tries = 0;
        loop {
            match self.attempt(prompt) {
                Err(e) if e.is_transient() && tries < self.config.retries => {
                    tries += 1;
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                other => return other,
            }
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub key: String,
    pub response: String,
}

/// Answers prompts from a JSON-lines fixture keyed by prompt digest.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    name: String,
    table: BTreeMap<String, String>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::Fixture { path: path.display().to_string(), message: e.to_string() })?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_jsonl(&name, &text)
    }

    pub fn from_jsonl(name: &str, text: &str) -> Result<Self, BackendError> {
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| BackendError::Fixture { path: format!("{name}:{}", i + 1), message };
            let rec: FixtureRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if let Some(prev) = table.insert(rec.key.clone(), rec.response.clone()) {
                if prev != rec.response {
                    return Err(bad(format!("conflicting responses for key {}", rec.key)));
                }
            }
        }
        Ok(ReplayBackend { name: name.to_string(), table })
    }

    pub fn from_records(name: &str, records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        ReplayBackend { name: name.to_string(), table: records.into_iter().map(|r| (r.key, r.response)).collect() }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn descriptor(&self) -> String {
        format!("replay:{}", self.name)
    }

    fn complete(&self, prompt: &str) -> Result<Completion, BackendError> {
        let digest = prompt_digest(prompt);
        let start = Instant::now();
        let text = self.table.get(&digest).cloned().ok_or(BackendError::MissingFixture { digest })?;
        Ok(Completion { latency_ms: start.elapsed().as_millis() as u64, ..Completion::text(text) })
    }
}

/// Returns canned responses in order, regardless of the prompt.
pub struct ScriptedBackend {
    responses: Mutex<std::collections::VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend { responses: Mutex::new(responses.into_iter().map(Into::into).collect()) }
    }
}

impl Backend for ScriptedBackend {
    fn descriptor(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, _prompt: &str) -> Result<Completion, BackendError> {
        let next = self.responses.lock().expect("poisoned").pop_front();
        next.map(Completion::text).ok_or(BackendError::Exhausted)
    }
}

/// Wraps a backend and keeps every (digest, response) pair it served, for
/// writing replay fixtures.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<FixtureRecord>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, log: Mutex::new(Vec::new()) }
    }

    /// Recorded pairs sorted by key, duplicates removed.
    pub fn records(&self) -> Vec<FixtureRecord> {
        let mut v = self.log.lock().expect("poisoned").clone();
        v.sort_by(|a, b| a.key.cmp(&b.key));
        v.dedup();
        v
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, BackendError> {
        let c = self.inner.complete(prompt)?;
        self.log
            .lock()
            .expect("poisoned")
            .push(FixtureRecord { key: prompt_digest(prompt), response: c.text.clone() });
        Ok(c)
    }
}

pub fn write_fixture(path: &Path, records: &[FixtureRecord]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable"));
        out.push('\n');
    }
    fs::write(path, out)
}
