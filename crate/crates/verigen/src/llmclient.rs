//! Dialogue management for a pluggable LLM backend, plus candidate
//! extraction from answers.
//!
//! Every completion presents the full prior transcript to the backend, so
//! answers stay context-aware. Two backends ship: an HTTP chat-completion
//! client and a deterministic record/replay store keyed by a digest of the
//! canonicalized transcript prefix plus the new query. Replay makes the
//! whole generation stage reproducible byte for byte.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::promptgen::{PromptSequence, Query, QueryKind};

/// Hard cap on trials per query; the candidate pool is intentionally small.
pub const MAX_SAMPLES_PER_QUERY: u32 = 10;

/// Default number of generation trials.
pub const DEFAULT_SAMPLES_PER_QUERY: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Turn {
    query: Query,
    answer: String,
}

/// An append-only record of (query, answer) pairs in generation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueTranscript {
    turns: Vec<Turn>,
}

impl DialogueTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// The (query, answer) pairs, oldest first.
    pub fn turns(&self) -> impl Iterator<Item = (&Query, &str)> {
        self.turns.iter().map(|t| (&t.query, t.answer.as_str()))
    }

    pub fn last_answer(&self) -> Option<&str> {
        self.turns.last().map(|t| t.answer.as_str())
    }

    fn push(&mut self, query: Query, answer: String) {
        self.turns.push(Turn { query, answer });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text)
            .map_err(|e| LlmError::BackendUnavailable(format!("bad transcript json: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub samples_per_query: u32,
    pub temperature: f64,
    pub backend_id: String,
}

impl GenerationParams {
    pub fn new(
        samples_per_query: u32,
        temperature: f64,
        backend_id: impl Into<String>,
    ) -> Result<Self, LlmError> {
        if samples_per_query == 0 || samples_per_query > MAX_SAMPLES_PER_QUERY {
            return Err(LlmError::InvalidParams(format!(
                "samples_per_query must be in 1..={MAX_SAMPLES_PER_QUERY} (got {samples_per_query})"
            )));
        }
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(LlmError::InvalidParams(format!(
                "temperature must be a non-negative real (got {temperature})"
            )));
        }
        Ok(GenerationParams {
            samples_per_query,
            temperature,
            backend_id: backend_id.into(),
        })
    }
}

/// Where a candidate came from: which prompt sequence, which trial, which
/// backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sequence_digest: String,
    pub sample_index: u32,
    pub backend_id: String,
}

/// One raw Verilog program with provenance and the running count of lines
/// changed by machine and human feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub source: String,
    pub module_name: String,
    pub provenance: Provenance,
    pub correction_loc: u64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no replay fixture for digest {digest} (call #{call_index})")]
    MissingFixture { digest: String, call_index: usize },
    #[error("rate limited{}", retry_after.map(|d| format!(", retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("answer contains no extractable Verilog")]
    EmptyExtraction,
    #[error("every trial produced an empty extraction")]
    NoCandidates,
    #[error("invalid generation params: {0}")]
    InvalidParams(String),
    #[error("replay io error: {0}")]
    Io(#[from] std::io::Error),
}

/// An LLM endpoint. Implementations receive the full prior transcript with
/// every call.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn complete_raw(
        &self,
        transcript: &DialogueTranscript,
        query: &Query,
        params: &GenerationParams,
    ) -> Result<String, LlmError>;
}

/// Sends `query` with the full transcript, appends the answer, and returns it.
pub fn complete(
    transcript: &mut DialogueTranscript,
    query: Query,
    params: &GenerationParams,
    backend: &dyn Backend,
) -> Result<String, LlmError> {
    let answer = backend.complete_raw(transcript, &query, params)?;
    transcript.push(query, answer.clone());
    Ok(answer)
}

#[derive(Serialize)]
struct CanonicalRequest<'a> {
    turns: Vec<(&'a str, &'a str)>,
    query: &'a str,
}

/// The fixture key: a SHA-256 over the canonicalized transcript prefix plus
/// the new query text.
pub fn request_digest(transcript: &DialogueTranscript, query: &Query) -> String {
    let canonical = CanonicalRequest {
        turns: transcript
            .turns()
            .map(|(q, a)| (q.text.as_str(), a))
            .collect(),
        query: &query.text,
    };
    let bytes = serde_json::to_vec(&canonical).expect("canonical request serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Replays recorded answers from a directory of digest-named fixtures.
///
/// Layout: `<root>/<digest>.txt` holds a single answer returned for every
/// call with that digest; `<root>/<digest>/<k>.txt` holds per-call answers
/// for requests that legitimately repeat (independent trials re-ask the same
/// first queries), consumed in call order.
pub struct ReplayBackend {
    root: PathBuf,
    id: String,
    counters: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ReplayBackend {
            root: root.into(),
            id: "replay".to_string(),
            counters: Mutex::new(HashMap::new()),
        }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete_raw(
        &self,
        transcript: &DialogueTranscript,
        query: &Query,
        _params: &GenerationParams,
    ) -> Result<String, LlmError> {
        let digest = request_digest(transcript, query);
        let call_index = {
            let mut counters = self.counters.lock().expect("replay counter lock");
            let slot = counters.entry(digest.clone()).or_insert(0);
            let idx = *slot;
            *slot += 1;
            idx
        };
        let single = self.root.join(format!("{digest}.txt"));
        if single.is_file() {
            return Ok(fs::read_to_string(single)?);
        }
        let per_call = self.root.join(&digest).join(format!("{call_index}.txt"));
        if per_call.is_file() {
            return Ok(fs::read_to_string(per_call)?);
        }
        Err(LlmError::MissingFixture { digest, call_index })
    }
}

/// Writes replay fixtures in the layout [`ReplayBackend`] reads.
pub struct ReplayRecorder {
    root: PathBuf,
    counters: Mutex<HashMap<String, usize>>,
}

impl ReplayRecorder {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ReplayRecorder {
            root: root.into(),
            counters: Mutex::new(HashMap::new()),
        }
    }

    /// Records `answer` for the request formed by `transcript` + `query`.
    /// Repeated identical requests are stored as per-call files.
    pub fn record(
        &self,
        transcript: &DialogueTranscript,
        query: &Query,
        answer: &str,
    ) -> std::io::Result<PathBuf> {
        let digest = request_digest(transcript, query);
        let call_index = {
            let mut counters = self.counters.lock().expect("recorder counter lock");
            let slot = counters.entry(digest.clone()).or_insert(0);
            let idx = *slot;
            *slot += 1;
            idx
        };
        let dir = self.root.join(&digest);
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{call_index}.txt"));
        fs::write(&path, answer)?;
        Ok(path)
    }
}

/// Wraps any backend and records every answer as a replay fixture.
pub struct RecordingBackend<B> {
    inner: B,
    recorder: ReplayRecorder,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, fixture_root: impl Into<PathBuf>) -> Self {
        RecordingBackend {
            inner,
            recorder: ReplayRecorder::new(fixture_root),
        }
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete_raw(
        &self,
        transcript: &DialogueTranscript,
        query: &Query,
        params: &GenerationParams,
    ) -> Result<String, LlmError> {
        let answer = self.inner.complete_raw(transcript, query, params)?;
        self.recorder.record(transcript, query, &answer)?;
        Ok(answer)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Serializes a transcript plus the new query into chat-completion messages:
/// alternating user/assistant turns, the new query last.
pub fn chat_messages(transcript: &DialogueTranscript, query: &Query) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(transcript.len() * 2 + 1);
    for (q, a) in transcript.turns() {
        messages.push(ChatMessage {
            role: "user".into(),
            content: q.text.clone(),
        });
        messages.push(ChatMessage {
            role: "assistant".into(),
            content: a.to_string(),
        });
    }
    messages.push(ChatMessage {
        role: "user".into(),
        content: query.text.clone(),
    });
    messages
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Bearer token; typically read from the environment by the caller.
    pub token: Option<String>,
}

/// Chat-completion HTTP client (ordered role/content messages, JSON body).
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let id = format!("http:{}", config.model);
        Ok(HttpBackend { config, client, id })
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete_raw(
        &self,
        transcript: &DialogueTranscript,
        query: &Query,
        params: &GenerationParams,
    ) -> Result<String, LlmError> {
        let messages = chat_messages(transcript, query);
        let body = ChatRequest {
            model: &self.config.model,
            messages: &messages,
            temperature: params.temperature,
        };
        let mut request = self.client.post(&self.config.endpoint).json(&body);
        if let Some(token) = &self.config.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(LlmError::RateLimited { retry_after });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            let excerpt: String = body.chars().take(400).collect();
            return Err(LlmError::BackendUnavailable(format!(
                "HTTP {status}: {excerpt}"
            )));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| LlmError::BackendUnavailable(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::BackendUnavailable("response has no choices".into()))
    }
}

/// Pulls Verilog sources out of an answer: fenced code blocks when any are
/// present, otherwise every balanced `module … endmodule` span found by
/// lexical scan of word boundaries. Order is preserved.
pub fn extract_code(answer: &str) -> Result<Vec<String>, LlmError> {
    let fenced = extract_fenced_blocks(answer);
    if !fenced.is_empty() {
        return Ok(fenced);
    }
    let spans = extract_module_spans(answer);
    if !spans.is_empty() {
        return Ok(spans);
    }
    Err(LlmError::EmptyExtraction)
}

fn extract_fenced_blocks(answer: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in answer.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    blocks
}

fn extract_module_spans(answer: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (pos, word) in word_tokens(answer) {
        match word {
            "module" | "macromodule" => {
                if depth == 0 {
                    start = pos;
                }
                depth += 1;
            }
            "endmodule" if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(answer[start..pos + word.len()].to_string());
                }
            }
            _ => {}
        }
    }
    spans
}

/// Word tokens with byte offsets; a word is a maximal `[A-Za-z0-9_$]+` run.
fn word_tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let bytes = text.as_bytes();
    let mut idx = 0usize;
    std::iter::from_fn(move || {
        while idx < bytes.len() && !is_word_byte(bytes[idx]) {
            idx += 1;
        }
        if idx >= bytes.len() {
            return None;
        }
        let start = idx;
        while idx < bytes.len() && is_word_byte(bytes[idx]) {
            idx += 1;
        }
        Some((start, &text[start..idx]))
    })
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

/// One generation trial's outcome: the candidate and the dialogue that
/// produced it (kept so later repair queries can continue the conversation).
#[derive(Debug, Clone)]
pub struct SampledCandidate {
    pub candidate: Candidate,
    pub transcript: DialogueTranscript,
}

/// Runs the dialogue `params.samples_per_query` times — a fresh transcript
/// per trial, identical queries — extracts one source per trial from the
/// final module answer, drops byte-identical duplicates, and labels the
/// survivors `P0`, `P1`, … in trial order.
pub fn sample_candidates_with_transcripts(
    sequence: &PromptSequence,
    params: &GenerationParams,
    backend: &dyn Backend,
) -> Result<Vec<SampledCandidate>, LlmError> {
    if params.samples_per_query == 0 || params.samples_per_query > MAX_SAMPLES_PER_QUERY {
        return Err(LlmError::InvalidParams(format!(
            "samples_per_query must be in 1..={MAX_SAMPLES_PER_QUERY}"
        )));
    }
    let final_subject = sequence
        .queries
        .iter()
        .rev()
        .find_map(|q| match q.kind {
            QueryKind::ModuleBody | QueryKind::Addition | QueryKind::Compose => q.subject.clone(),
            _ => None,
        })
        .ok_or_else(|| {
            LlmError::InvalidParams("prompt sequence has no module-producing query".into())
        })?;
    let sequence_digest = sequence.digest();

    let mut sampled: Vec<SampledCandidate> = Vec::new();
    let mut seen_sources: Vec<String> = Vec::new();
    let mut empty_trials = 0u32;
    for trial in 0..params.samples_per_query {
        let mut transcript = DialogueTranscript::new();
        for query in &sequence.queries {
            complete(&mut transcript, query.clone(), params, backend)?;
        }
        let answer = transcript.last_answer().unwrap_or_default();
        let source = match extract_code(answer) {
            Ok(blocks) => blocks.join("\n\n"),
            Err(LlmError::EmptyExtraction) => {
                empty_trials += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if seen_sources.contains(&source) {
            continue;
        }
        seen_sources.push(source.clone());
        let id = format!("P{}", sampled.len());
        sampled.push(SampledCandidate {
            candidate: Candidate {
                id,
                source,
                module_name: final_subject.clone(),
                provenance: Provenance {
                    sequence_digest: sequence_digest.clone(),
                    sample_index: trial,
                    backend_id: params.backend_id.clone(),
                },
                correction_loc: 0,
            },
            transcript,
        });
    }
    if sampled.is_empty() && empty_trials > 0 {
        return Err(LlmError::NoCandidates);
    }
    Ok(sampled)
}

/// [`sample_candidates_with_transcripts`] without the transcripts.
pub fn sample_candidates(
    sequence: &PromptSequence,
    params: &GenerationParams,
    backend: &dyn Backend,
) -> Result<Vec<Candidate>, LlmError> {
    Ok(
        sample_candidates_with_transcripts(sequence, params, backend)?
            .into_iter()
            .map(|s| s.candidate)
            .collect(),
    )
}
