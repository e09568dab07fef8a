//! Completion providers behind one interface: live HTTP, cassette record and
//! replay, and scripted fixtures. Also hosts the top-k voting helper.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;
pub const CASSETTE_VERSION: u32 = 1;

pub const ENV_URL: &str = "FLOWPLAN_LLM_URL";
pub const ENV_KEY: &str = "FLOWPLAN_LLM_KEY";
pub const ENV_MODEL: &str = "FLOWPLAN_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("cassette miss for stage `{stage_id}` (key {key})")]
    CassetteMiss { stage_id: String, key: String },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider refused request ({status}): {message}")]
    ProviderRefusal { status: u16, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cassette: {0}")]
    Cassette(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub stage_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n: usize,
}

impl CompletionRequest {
    pub fn new(stage_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            stage_id: stage_id.into(),
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            n: 1,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.n == 0 {
            return Err(LlmError::InvalidRequest("n must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }

    /// Stable content hash of stage, prompt and sampling parameters.
    pub fn key(&self) -> String {
        let canonical = serde_json::json!({
            "stage_id": self.stage_id,
            "prompt": self.prompt,
            "temperature": self.temperature,
            "n": self.n,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    pub fn prompt_digest(&self) -> String {
        sha256_hex(self.prompt.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Anything that can answer completion requests with exactly `n` texts.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for Arc<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        (**self).complete(request)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        (**self).complete(request)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub stage_id: String,
    pub prompt_digest: String,
    pub responses: Vec<String>,
}

/// Keyed recording of completion responses. Entries keep first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub entries: Vec<CassetteEntry>,
}

impl Default for Cassette {
    fn default() -> Self {
        Self { version: CASSETTE_VERSION, entries: Vec::new() }
    }
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let cassette: Cassette = serde_json::from_str(&crate::read_text(path)?)?;
        if cassette.version != CASSETTE_VERSION {
            return Err(LlmError::Cassette(format!("unsupported version {}", cassette.version)).into());
        }
        Ok(cassette)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        crate::write_text(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn get(&self, key: &str) -> Option<&CassetteEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn response_count(&self) -> usize {
        self.entries.iter().map(|e| e.responses.len()).sum()
    }

    pub fn append(&mut self, request: &CompletionRequest, responses: &[String]) {
        let key = request.key();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(entry) => entry.responses.extend_from_slice(responses),
            None => self.entries.push(CassetteEntry {
                key,
                stage_id: request.stage_id.clone(),
                prompt_digest: request.prompt_digest(),
                responses: responses.to_vec(),
            }),
        }
    }

    /// Merge another recording of the same deterministic responder. For every
    /// shared key one response list must be a prefix of the other; the longer
    /// one is kept.
    pub fn merge_prefix(&mut self, other: &Cassette) -> Result<(), LlmError> {
        for theirs in &other.entries {
            match self.entries.iter_mut().find(|e| e.key == theirs.key) {
                None => self.entries.push(theirs.clone()),
                Some(ours) => {
                    let n = ours.responses.len().min(theirs.responses.len());
                    if ours.responses[..n] != theirs.responses[..n] {
                        return Err(LlmError::Cassette(format!(
                            "conflicting responses for stage `{}` key {}",
                            theirs.stage_id, theirs.key
                        )));
                    }
                    if theirs.responses.len() > ours.responses.len() {
                        ours.responses = theirs.responses.clone();
                    }
                }
            }
        }
        Ok(())
    }
}

/// Serves responses from a cassette, consuming each key's list in order.
/// Never touches the network.
pub struct ReplayProvider {
    entries: Arc<HashMap<String, Vec<String>>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayProvider {
    pub fn new(cassette: &Cassette) -> Self {
        Self {
            entries: Arc::new(cassette.entries.iter().map(|e| (e.key.clone(), e.responses.clone())).collect()),
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// A replayer over the same entries with fresh cursors.
    pub fn fork(&self) -> Self {
        Self { entries: Arc::clone(&self.entries), cursors: Mutex::new(HashMap::new()) }
    }

    pub fn from_file(path: &Path) -> crate::Result<Self> {
        Ok(Self::new(&Cassette::load(path)?))
    }
}

impl LlmProvider for ReplayProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        let key = request.key();
        let miss = || LlmError::CassetteMiss { stage_id: request.stage_id.clone(), key: key.clone() };
        let responses = self.entries.get(&key).ok_or_else(miss)?;
        let mut cursors = self.cursors.lock().unwrap();
        let cursor = cursors.entry(key.clone()).or_insert(0);
        if *cursor + request.n > responses.len() {
            return Err(miss());
        }
        let out = responses[*cursor..*cursor + request.n].to_vec();
        *cursor += request.n;
        Ok(out)
    }
}

/// Forwards to an inner provider and appends every answer to a cassette.
pub struct RecordingProvider<P> {
    inner: P,
    cassette: Mutex<Cassette>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, cassette: Mutex::new(Cassette::new()) }
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        self.cassette.lock().unwrap().save(path)
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        let responses = self.inner.complete(request)?;
        self.cassette.lock().unwrap().append(request, &responses);
        Ok(responses)
    }
}

type ScriptFn = dyn Fn(&CompletionRequest) -> Result<Vec<String>, LlmError> + Send + Sync;

/// Test fixture provider: either fixed per-stage queues or a closure.
pub struct ScriptedProvider {
    queues: Mutex<BTreeMap<String, Vec<String>>>,
    func: Option<Box<ScriptFn>>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self { queues: Mutex::new(BTreeMap::new()), func: None }
    }

    /// Queue responses for a stage; each request consumes `n` of them.
    pub fn with_stage<I, S>(self, stage_id: &str, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.queues
            .lock()
            .unwrap()
            .entry(stage_id.to_string())
            .or_default()
            .extend(responses.into_iter().map(Into::into));
        self
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<Vec<String>, LlmError> + Send + Sync + 'static,
    {
        Self { queues: Mutex::new(BTreeMap::new()), func: Some(Box::new(f)) }
    }
}

impl Default for ScriptedProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        if let Some(f) = &self.func {
            let out = f(request)?;
            if out.len() != request.n {
                return Err(LlmError::InvalidRequest(format!(
                    "script returned {} responses, {} requested",
                    out.len(),
                    request.n
                )));
            }
            return Ok(out);
        }
        let mut queues = self.queues.lock().unwrap();
        let queue = queues.entry(request.stage_id.clone()).or_default();
        if queue.len() < request.n {
            return Err(LlmError::CassetteMiss { stage_id: request.stage_id.clone(), key: request.key() });
        }
        Ok(queue.drain(..request.n).collect())
    }
}

/// OpenAI-compatible chat-completion client.
pub struct LiveProvider {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl LiveProvider {
    pub fn new(url: &str, api_key: Option<String>, model: &str) -> Self {
        let base = url.trim_end_matches('/');
        let endpoint = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self { endpoint, api_key, model: model.to_string(), agent, max_retries: 3, backoff: Duration::from_millis(500) }
    }

    /// Reads `FLOWPLAN_LLM_URL`, `FLOWPLAN_LLM_KEY` and `FLOWPLAN_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| LlmError::InvalidRequest(format!("{ENV_URL} is not set")))?;
        let key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4-0125-preview".to_string());
        Ok(Self::new(&url, key, &model))
    }

    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> Self {
        self.max_retries = retries;
        self
    }

    fn call_once(&self, request: &CompletionRequest, n: usize) -> Result<Vec<String>, Attempt> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "n": n,
        });
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(LlmError::ProviderRefusal { status, message }));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(LlmError::ProviderRefusal { status, message: format!("bad body: {e}") }))?;
        Ok(parsed.choices.into_iter().map(|c| c.message.content.unwrap_or_default()).collect())
    }

    fn call_with_retries(&self, request: &CompletionRequest, n: usize) -> Result<Vec<String>, LlmError> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.call_once(request, n) {
                Ok(out) => return Ok(out),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(LlmError::Transport { attempts: self.max_retries + 1, message: last })
    }
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

impl LlmProvider for LiveProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        let mut out = Vec::with_capacity(request.n);
        // Some servers ignore `n`; keep asking until enough choices arrive.
        while out.len() < request.n {
            let got = self.call_with_retries(request, request.n - out.len())?;
            if got.is_empty() {
                return Err(LlmError::ProviderRefusal { status: 200, message: "no choices returned".into() });
            }
            out.extend(got);
        }
        out.truncate(request.n);
        Ok(out)
    }
}

/// How the CLI obtains completions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderMode {
    None,
    Live,
    Replay(PathBuf),
    Record(PathBuf),
}

impl std::str::FromStr for ProviderMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("replay", p)) if !p.is_empty() => Ok(ProviderMode::Replay(PathBuf::from(p))),
            Some(("record", p)) if !p.is_empty() => Ok(ProviderMode::Record(PathBuf::from(p))),
            None if s == "live" => Ok(ProviderMode::Live),
            None if s == "none" => Ok(ProviderMode::None),
            _ => Err(format!("expected none, live, replay:<path> or record:<path>, got `{s}`")),
        }
    }
}

impl fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderMode::None => f.write_str("none"),
            ProviderMode::Live => f.write_str("live"),
            ProviderMode::Replay(p) => write!(f, "replay:{}", p.display()),
            ProviderMode::Record(p) => write!(f, "record:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("none of {0} responses could be parsed")]
pub struct NoValidVotes(pub usize);

/// Parse every response and return the most frequent label. Unparseable
/// responses are dropped; ties go to the label seen first.
pub fn majority_vote<T, E, F>(responses: &[String], parse: F) -> Result<T, NoValidVotes>
where
    T: PartialEq + Clone,
    F: Fn(&str) -> Result<T, E>,
{
    let mut tally: Vec<(T, usize)> = Vec::new();
    for r in responses {
        let Ok(label) = parse(r) else { continue };
        match tally.iter_mut().find(|(l, _)| *l == label) {
            Some((_, count)) => *count += 1,
            None => tally.push((label, 1)),
        }
    }
    let mut best: Option<&(T, usize)> = None;
    for entry in &tally {
        if best.is_none_or(|b| entry.1 > b.1) {
            best = Some(entry);
        }
    }
    best.map(|(l, _)| l.clone()).ok_or(NoValidVotes(responses.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{parse_task_label, TaskCategory, TaskType};

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn vote_majority_and_ties() {
        let heat = TaskType::new(TaskCategory::HeatPlace, false);
        let r = strings(&["Heat & Place", "Heat & Place", "Pick & Place"]);
        assert_eq!(majority_vote(&r, parse_task_label).unwrap(), heat);
        let r = strings(&["Heat & Place", "Pick & Place"]);
        assert_eq!(majority_vote(&r, parse_task_label).unwrap(), heat);
        let r = strings(&["garbage", "garbage"]);
        assert_eq!(majority_vote(&r, parse_task_label), Err(NoValidVotes(2)));
    }

    #[test]
    fn replay_hit_and_miss() {
        let req = CompletionRequest::new("classify", "p");
        let mut c = Cassette::new();
        c.append(&req, &strings(&["Pick & Place"]));
        let replay = ReplayProvider::new(&c);
        assert_eq!(replay.complete(&req).unwrap(), strings(&["Pick & Place"]));
        match replay.complete(&req) {
            Err(LlmError::CassetteMiss { stage_id, key }) => {
                assert_eq!(stage_id, "classify");
                assert_eq!(key, req.key());
            }
            other => panic!("{other:?}"),
        }
        let other = CompletionRequest::new("reason", "p");
        assert!(matches!(replay.complete(&other), Err(LlmError::CassetteMiss { .. })));
    }

    #[test]
    fn replay_consumes_in_order_with_n() {
        let req = CompletionRequest::new("classify", "p").with_n(2);
        let mut c = Cassette::new();
        c.append(&req, &strings(&["a", "b"]));
        c.append(&req, &strings(&["c", "d"]));
        let replay = ReplayProvider::new(&c);
        assert_eq!(replay.complete(&req).unwrap(), strings(&["a", "b"]));
        assert_eq!(replay.complete(&req).unwrap(), strings(&["c", "d"]));
        assert!(replay.complete(&req).is_err());
    }

    #[test]
    fn key_depends_on_params() {
        let a = CompletionRequest::new("classify", "p");
        assert_ne!(a.key(), a.clone().with_n(3).key());
        assert_ne!(a.key(), a.clone().with_temperature(0.0).key());
        assert_ne!(a.key(), CompletionRequest::new("reason", "p").key());
        assert_eq!(a.key(), a.clone().with_max_tokens(10).key());
    }

    #[test]
    fn record_then_replay() {
        let script = ScriptedProvider::new().with_stage("s", ["x", "y", "z"]);
        let rec = RecordingProvider::new(script);
        let req = CompletionRequest::new("s", "prompt");
        let first = rec.complete(&req).unwrap();
        let second = rec.complete(&req.clone().with_n(2)).unwrap();
        let cassette = rec.cassette();
        assert_eq!(cassette.entries.len(), 2);
        let replay = ReplayProvider::new(&cassette);
        assert_eq!(replay.complete(&req).unwrap(), first);
        assert_eq!(replay.complete(&req.with_n(2)).unwrap(), second);
    }

    #[test]
    fn merge_prefix_keeps_longest_and_rejects_conflicts() {
        let req = CompletionRequest::new("s", "p");
        let mut a = Cassette::new();
        a.append(&req, &strings(&["1"]));
        let mut b = Cassette::new();
        b.append(&req, &strings(&["1", "2"]));
        a.merge_prefix(&b).unwrap();
        assert_eq!(a.get(&req.key()).unwrap().responses, strings(&["1", "2"]));
        let mut c = Cassette::new();
        c.append(&req, &strings(&["9"]));
        assert!(a.merge_prefix(&c).is_err());
    }

    #[test]
    fn invalid_requests_rejected() {
        let replay = ReplayProvider::new(&Cassette::new());
        let req = CompletionRequest::new("s", "p").with_n(0);
        assert!(matches!(replay.complete(&req), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn provider_mode_parsing() {
        assert_eq!("replay:c.json".parse::<ProviderMode>().unwrap(), ProviderMode::Replay("c.json".into()));
        assert_eq!("live".parse::<ProviderMode>().unwrap(), ProviderMode::Live);
        assert!("replay:".parse::<ProviderMode>().is_err());
        assert!("bogus".parse::<ProviderMode>().is_err());
    }
}
