//! Language-model providers and the call ledger.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("scripted transcript exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("transcript: {0}")]
    Script(String),
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Response(String),
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            model: "default".into(),
            temperature: 0.2,
            max_tokens: 1024,
        }
    }
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError>;

    fn describe(&self) -> String;
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        (**self).complete(prompt, params)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

const CALL_HEADER: &str = "=== call ";

/// Responses to consume one after another, in the transcript format
/// `=== call N ===` followed by the response text.
#[derive(Debug)]
pub struct ScriptedProvider {
    responses: Vec<String>,
    next: Mutex<usize>,
    source: String,
}

impl ScriptedProvider {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses,
            next: Mutex::new(0),
            source: "inline".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ProviderError> {
        let mut responses: Vec<String> = Vec::new();
        let mut cur: Option<Vec<&str>> = None;
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix(CALL_HEADER) {
                let ok = rest
                    .trim_end()
                    .strip_suffix("===")
                    .map(|s| s.trim().parse::<usize>().is_ok())
                    .unwrap_or(false);
                if !ok {
                    return Err(ProviderError::Script(format!("line {}: bad call header", n + 1)));
                }
                if let Some(c) = cur.take() {
                    responses.push(join_block(&c));
                }
                cur = Some(Vec::new());
            } else if let Some(c) = cur.as_mut() {
                c.push(line);
            } else if !line.trim().is_empty() {
                return Err(ProviderError::Script(format!("line {}: text before first call header", n + 1)));
            }
        }
        if let Some(c) = cur {
            responses.push(join_block(&c));
        }
        Ok(Self::new(responses))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Script(format!("{}: {e}", path.display())))?;
        let mut p = Self::parse(&text)?;
        p.source = path.display().to_string();
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn consumed(&self) -> usize {
        *self.next.lock().unwrap()
    }
}

fn join_block(lines: &[&str]) -> String {
    let mut end = lines.len();
    while end > 0 && lines[end - 1].trim().is_empty() {
        end -= 1;
    }
    lines[..end]
        .iter()
        .map(|l| l.strip_prefix('\\').filter(|r| r.starts_with(CALL_HEADER)).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders responses in the format `ScriptedProvider::parse` reads.
pub fn render_transcript(responses: &[String]) -> String {
    let mut s = String::new();
    for (i, r) in responses.iter().enumerate() {
        s.push_str(&format!("{CALL_HEADER}{} ===\n", i + 1));
        for line in r.lines() {
            if line.starts_with(CALL_HEADER) {
                s.push('\\');
            }
            s.push_str(line);
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, _prompt: &str, _params: &CompletionParams) -> Result<String, ProviderError> {
        let mut next = self.next.lock().unwrap();
        let r = self
            .responses
            .get(*next)
            .cloned()
            .ok_or(ProviderError::ScriptExhausted(self.responses.len()))?;
        *next += 1;
        Ok(r)
    }

    fn describe(&self) -> String {
        format!("scripted:{}", self.source)
    }
}

/// Passes calls through and keeps every response for later replay.
pub struct RecordingProvider<P> {
    inner: P,
    responses: Mutex<Vec<String>>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            responses: Mutex::new(Vec::new()),
        }
    }

    pub fn transcript(&self) -> String {
        render_transcript(&self.responses.lock().unwrap())
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        let r = self.inner.complete(prompt, params)?;
        self.responses.lock().unwrap().push(r.clone());
        Ok(r)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// How requests and responses are shaped for a given backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WireFormat {
    /// `{model, prompt, temperature, max_tokens}` -> `{text}`.
    Plain,
    /// Chat-completions style `messages` request.
    OpenaiChat,
}

impl WireFormat {
    pub fn default_pointer(self) -> &'static str {
        match self {
            WireFormat::Plain => "/text",
            WireFormat::OpenaiChat => "/choices/0/message/content",
        }
    }

    pub fn request(self, prompt: &str, p: &CompletionParams) -> serde_json::Value {
        match self {
            WireFormat::Plain => serde_json::json!({
                "model": p.model,
                "prompt": prompt,
                "temperature": p.temperature,
                "max_tokens": p.max_tokens,
            }),
            WireFormat::OpenaiChat => serde_json::json!({
                "model": p.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": p.temperature,
                "max_tokens": p.max_tokens,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub endpoint: String,
    pub format: WireFormat,
    /// JSON pointer to the response text; defaults per format.
    pub response_pointer: Option<String>,
    /// Name of the environment variable holding a bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

/// Blocking JSON-over-POST provider.
pub struct HttpProvider {
    settings: HttpSettings,
    agent: ureq::Agent,
    key: Option<String>,
}

impl HttpProvider {
    pub fn new(settings: HttpSettings) -> Result<Self, ProviderError> {
        let key = match &settings.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingKey(var.clone()))?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(Self { settings, agent, key })
    }
}

impl LlmProvider for HttpProvider {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(k) = &self.key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req
            .send_json(self.settings.format.request(prompt, params))
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 400 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Status {
                status,
                body: body.chars().take(500).collect(),
            });
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Response(e.to_string()))?;
        let pointer = self
            .settings
            .response_pointer
            .as_deref()
            .unwrap_or(self.settings.format.default_pointer());
        value
            .pointer(pointer)
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Response(format!("no string at `{pointer}`")))
    }

    fn describe(&self) -> String {
        format!("http:{}", self.settings.endpoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum CallRole {
    Encode { agent: usize, batch: usize },
    Decode { agent: usize },
    Critique { agent: usize, iteration: usize },
    Refine { agent: usize, iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: usize,
    #[serde(flatten)]
    pub role: CallRole,
    /// 0 for the first attempt, n for the n-th regeneration.
    pub attempt: usize,
    pub prompt_tokens_est: usize,
    pub response_tokens_est: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: usize,
    pub first_attempts: usize,
    pub retries: usize,
    pub prompt_tokens_est: usize,
    pub response_tokens_est: usize,
}

/// Rough token estimate: one token per four characters.
pub fn estimate_tokens(s: &str) -> usize {
    s.chars().count().div_ceil(4)
}

/// Every provider call goes through here.
pub struct CallLedger<'a> {
    provider: &'a dyn LlmProvider,
    params: CompletionParams,
    entries: Mutex<Vec<LedgerEntry>>,
}

impl<'a> CallLedger<'a> {
    pub fn new(provider: &'a dyn LlmProvider, params: CompletionParams) -> Self {
        Self {
            provider,
            params,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn call(&self, role: CallRole, attempt: usize, prompt: &str) -> Result<String, ProviderError> {
        let result = self.provider.complete(prompt, &self.params);
        let mut entries = self.entries.lock().unwrap();
        let index = entries.len();
        entries.push(LedgerEntry {
            index,
            role,
            attempt,
            prompt_tokens_est: estimate_tokens(prompt),
            response_tokens_est: result.as_ref().map_or(0, |r| estimate_tokens(r)),
            ok: result.is_ok(),
        });
        result
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn summary(&self) -> LedgerSummary {
        summarize(&self.entries.lock().unwrap())
    }

    pub fn provider_name(&self) -> String {
        self.provider.describe()
    }
}

pub fn summarize(entries: &[LedgerEntry]) -> LedgerSummary {
    let mut s = LedgerSummary::default();
    for e in entries {
        s.total += 1;
        if e.attempt == 0 {
            s.first_attempts += 1;
        } else {
            s.retries += 1;
        }
        s.prompt_tokens_est += e.prompt_tokens_est;
        s.response_tokens_est += e.response_tokens_est;
    }
    s
}
