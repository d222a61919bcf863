//! LLM provider abstraction with a deterministic scripted mock, fixture
//! replay and recording, and an OpenAI-compatible HTTP client.

use std::fs;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::{self, parse_evidence, parse_record_section};
use crate::curation::{match_dimensions, DisabilityDimension, KeywordLexicon};
use crate::index::sentence_spans;
use crate::text::{char_slice, lexical_tokens, sha256_hex};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

pub trait LlmProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    /// `schema_hint` describes the JSON shape the caller will parse.
    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        (**self).generate(prompt, schema_hint)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        (**self).generate(prompt, schema_hint)
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    sha256_hex(prompt)
}

const NAMES: [&str; 12] = [
    "Alex", "Sam", "Jordan", "Riley", "Casey", "Morgan", "Taylor", "Jamie", "Robin", "Avery", "Quinn", "Drew",
];

fn canned_requirements(dim: DisabilityDimension) -> [&'static str; 2] {
    match dim {
        DisabilityDimension::Vision => [
            "Adjustable text size and high-contrast interface options",
            "Audio or haptic cues for information shown only visually",
        ],
        DisabilityDimension::Hearing => [
            "Subtitles and captions for all dialogue and narration",
            "Visual indicators for sounds that matter to gameplay",
        ],
        DisabilityDimension::Motor => [
            "Seated play and one-handed control options",
            "Remappable controls with lower grip, reach and precision demands",
        ],
        DisabilityDimension::Cognitive => [
            "Clear instructions that can be replayed at the player's own pace",
            "Options to reduce sensory load and time pressure",
        ],
        DisabilityDimension::Vestibular => [
            "Comfort locomotion options such as teleport and snap turning",
            "Comfort vignette and adjustable movement speed",
        ],
        DisabilityDimension::Speech => [
            "Text chat or quick messages as alternatives to voice chat",
            "Voice commands that are optional rather than required",
        ],
    }
}

fn first_sentence(text: &str, max_words: usize) -> String {
    let mut words = Vec::new();
    for w in text.split_whitespace() {
        words.push(w);
        if words.len() >= max_words || w.ends_with(['.', '!', '?']) {
            break;
        }
    }
    words.join(" ")
}

/// First sentence that signals `dim`, else the first sentence; at most
/// `max_words` words, always a verbatim prefix of that sentence.
fn salient_sentence(text: &str, dim: DisabilityDimension, max_words: usize) -> String {
    static LEXICON: OnceLock<KeywordLexicon> = OnceLock::new();
    let lexicon = LEXICON.get_or_init(KeywordLexicon::builtin);
    sentence_spans(text)
        .into_iter()
        .map(|(a, b)| char_slice(text, a, b))
        .find(|s| match_dimensions(s, lexicon).contains(&dim))
        .map(|s| first_sentence(s, max_words))
        .unwrap_or_else(|| first_sentence(text, max_words))
}

fn stated_age(texts: &[(String, String)]) -> Option<String> {
    for (_, text) in texts {
        let tokens = lexical_tokens(text);
        for w in tokens.windows(3) {
            if w[1] == "years" && w[2] == "old" && w[0].len() == 2 && w[0].chars().all(|c| c.is_ascii_digit()) {
                return Some(w[0].clone());
            }
        }
    }
    None
}

/// Offline stand-in for a chat model: a pure function of the prompt bytes.
///
/// It reads the evidence blocks (and, for compile prompts, the embedded
/// record) back out of the prompt and answers with well-formed JSON whose
/// quotes are copied verbatim from the evidence.
#[derive(Debug, Clone, Default)]
pub struct ScriptedLlm;

impl ScriptedLlm {
    pub const ID: &'static str = "scripted-mock";

    fn dimension(prompt: &str) -> DisabilityDimension {
        prompt
            .lines()
            .find_map(|l| l.strip_prefix("DIMENSION: "))
            .and_then(|d| d.parse().ok())
            .or_else(|| parse_record_section(prompt).map(|r| r.dimension))
            .unwrap_or(DisabilityDimension::Vestibular)
    }

    fn extract(prompt: &str) -> String {
        let dim = Self::dimension(prompt);
        let evidence = parse_evidence(prompt);
        let pain_points: Vec<String> = evidence.iter().take(3).map(|(_, t)| salient_sentence(t, dim, 30)).collect();
        let age = stated_age(&evidence).unwrap_or_else(|| "unspecified".into());
        let category = prompt
            .lines()
            .find_map(|l| l.strip_prefix("CATEGORY: "))
            .unwrap_or("VR");
        json!({
            "summary": format!(
                "Players of {category} VR applications describe {dim}-related barriers in {} retrieved reviews.",
                evidence.len()
            ),
            "dimension": dim.as_str(),
            "requirements": canned_requirements(dim),
            "pain_points": if pain_points.is_empty() { vec!["Unspecified barrier".to_string()] } else { pain_points },
            "demographics": {
                "age": age,
                "gender": "unspecified",
                "occupation": "unspecified",
                "vr_experience": "unspecified",
            }
        })
        .to_string()
    }

    fn compile(prompt: &str) -> String {
        let evidence = parse_evidence(prompt);
        let record = parse_record_section(prompt);
        let digest = prompt_hash(prompt);
        let name = NAMES[usize::from_str_radix(&digest[..4], 16).unwrap_or(0) % NAMES.len()];
        let dim = Self::dimension(prompt);
        let summary = record.as_ref().map(|r| r.summary.clone()).unwrap_or_default();
        let first_req = record
            .as_ref()
            .and_then(|r| r.requirements.first().cloned())
            .unwrap_or_default();
        let quotes: Vec<_> = evidence
            .iter()
            .take(2)
            .map(|(id, text)| json!({"text": salient_sentence(text, dim, 25), "source_chunk_id": id}))
            .collect();
        json!({
            "display_name": name,
            "biography": format!(
                "{name} plays VR regularly and runs into {dim} accessibility barriers. {summary} \
                 What would help most: {}.",
                first_req.to_lowercase()
            ),
            "quotes": quotes,
        })
        .to_string()
    }
}

impl LlmProvider for ScriptedLlm {
    fn provider_id(&self) -> &str {
        Self::ID
    }

    fn generate(&self, prompt: &str, _schema_hint: &str) -> Result<String, LlmError> {
        if prompt.contains("TASK: compile") {
            Ok(Self::compile(prompt))
        } else if prompt.contains("TASK: extract") {
            Ok(Self::extract(prompt))
        } else {
            Err(LlmError::Unavailable("scripted mock does not recognise this prompt".into()))
        }
    }
}

/// A recorded prompt/response pair, stored as `{prompt_sha256}.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCompletion {
    pub provider_id: String,
    pub prompt_sha256: String,
    pub response: String,
}

/// Answers from recorded fixtures keyed by prompt hash.
pub struct ReplayLlm {
    dir: PathBuf,
    id: String,
}

impl ReplayLlm {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            id: "replay".into(),
        }
    }
}

impl LlmProvider for ReplayLlm {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &str, _schema_hint: &str) -> Result<String, LlmError> {
        let hash = prompt_hash(prompt);
        let path = self.dir.join(format!("{hash}.json"));
        let text = fs::read_to_string(&path)
            .map_err(|_| LlmError::Unavailable(format!("no recorded response for prompt {hash}")))?;
        let rec: RecordedCompletion = serde_json::from_str(&text)
            .map_err(|e| LlmError::Unavailable(format!("fixture {}: {e}", path.display())))?;
        Ok(rec.response)
    }
}

/// Passes calls through and records each completion for later replay.
pub struct RecordingLlm<P> {
    inner: P,
    dir: PathBuf,
}

impl<P: LlmProvider> RecordingLlm<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<P: LlmProvider> LlmProvider for RecordingLlm<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        let response = self.inner.generate(prompt, schema_hint)?;
        let rec = RecordedCompletion {
            provider_id: self.inner.provider_id().to_string(),
            prompt_sha256: prompt_hash(prompt),
            response: response.clone(),
        };
        let write = || -> std::io::Result<()> {
            fs::create_dir_all(&self.dir)?;
            let json = serde_json::to_string_pretty(&rec).map_err(std::io::Error::other)?;
            fs::write(self.dir.join(format!("{}.json", rec.prompt_sha256)), json)
        };
        if let Err(e) = write() {
            log::warn!("could not record completion: {e}");
        }
        Ok(response)
    }
}

/// OpenAI-compatible chat completions client.
pub struct RemoteLlm {
    endpoint: String,
    model: String,
    api_key: String,
    id: String,
    agent: ureq::Agent,
}

impl RemoteLlm {
    pub const ENDPOINT_ENV: &'static str = "PERSONA_LLM_URL";
    pub const KEY_ENV: &'static str = "PERSONA_LLM_API_KEY";
    pub const MODEL_ENV: &'static str = "PERSONA_LLM_MODEL";
    pub const DEFAULT_ENDPOINT: &'static str = "https://api.openai.com/v1/chat/completions";
    pub const DEFAULT_MODEL: &'static str = "gpt-4o";

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        let model = model.into();
        Self {
            id: format!("openai-compatible:{model}"),
            endpoint: endpoint.into(),
            model,
            api_key: api_key.into(),
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .into(),
        }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let key = std::env::var(Self::KEY_ENV)
            .map_err(|_| LlmError::Unavailable(format!("{} is not set", Self::KEY_ENV)))?;
        let endpoint = std::env::var(Self::ENDPOINT_ENV).unwrap_or_else(|_| Self::DEFAULT_ENDPOINT.into());
        let model = std::env::var(Self::MODEL_ENV).unwrap_or_else(|_| Self::DEFAULT_MODEL.into());
        Ok(Self::new(endpoint, model, key))
    }
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
    content: Option<String>,
}

impl LlmProvider for RemoteLlm {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": format!("Reply with JSON matching: {schema_hint}")},
                {"role": "user", "content": prompt},
            ],
        });
        // errors are reported without the request so the key never leaks
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Unavailable(format!("chat request failed: {}", redact(&e.to_string(), &self.api_key))))?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Unavailable(format!("chat response unreadable: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Unavailable("chat response had no content".into()))
    }
}

fn redact(message: &str, secret: &str) -> String {
    if secret.is_empty() {
        message.to_string()
    } else {
        message.replace(secret, "[redacted]")
    }
}

/// Caps the number of in-flight calls to the wrapped provider.
pub struct ConcurrencyCap<P> {
    inner: P,
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<P: LlmProvider> ConcurrencyCap<P> {
    pub const DEFAULT_LIMIT: usize = 2;

    pub fn new(inner: P, limit: usize) -> Self {
        Self {
            inner,
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

impl<P: LlmProvider> LlmProvider for ConcurrencyCap<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn generate(&self, prompt: &str, schema_hint: &str) -> Result<String, LlmError> {
        {
            let mut n = self.in_flight.lock().unwrap_or_else(|p| p.into_inner());
            while *n >= self.limit {
                n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
            }
            *n += 1;
        }
        let result = self.inner.generate(prompt, schema_hint);
        *self.in_flight.lock().unwrap_or_else(|p| p.into_inner()) -= 1;
        self.freed.notify_one();
        result
    }
}

pub use prompt::{COMPILE_SCHEMA, EXTRACT_SCHEMA};

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn scripted_is_pure() {
        let p = "TASK: extract\nDIMENSION: hearing\nCATEGORY: social\n<<<chunk a#0>>>\nNo subtitles anywhere. Sad.\n<<<end>>>\n";
        let a = ScriptedLlm.generate(p, "").unwrap();
        assert_eq!(a, ScriptedLlm.generate(p, "").unwrap());
        let r = prompt::parse_extraction(&a).unwrap();
        assert_eq!(r.dimension.as_deref(), Some("hearing"));
        assert_eq!(r.pain_points, vec!["No subtitles anywhere."]);
    }

    #[test]
    fn scripted_rejects_unknown_prompt() {
        assert!(ScriptedLlm.generate("hello", "").is_err());
    }

    #[test]
    fn age_only_when_stated() {
        let ev = vec![("a".to_string(), "I am 67 years old and get dizzy".to_string())];
        assert_eq!(stated_age(&ev).as_deref(), Some("67"));
        assert_eq!(stated_age(&[("a".into(), "many years old game".into())]), None);
    }

    #[test]
    fn record_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let prompt = "TASK: extract\nDIMENSION: motor\n";
        let live = RecordingLlm::new(ScriptedLlm, dir.path()).generate(prompt, "").unwrap();
        let replay = ReplayLlm::new(dir.path());
        assert_eq!(replay.generate(prompt, "").unwrap(), live);
        assert!(replay.generate("other prompt", "").is_err());
    }

    #[test]
    fn redacts_secret() {
        assert_eq!(redact("bad key sk-123 rejected", "sk-123"), "bad key [redacted] rejected");
    }

    struct Slow {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl LlmProvider for Slow {
        fn provider_id(&self) -> &str {
            "slow"
        }
        fn generate(&self, _: &str, _: &str) -> Result<String, LlmError> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(15));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(String::new())
        }
    }

    #[test]
    fn cap_limits_in_flight() {
        let capped = Arc::new(ConcurrencyCap::new(
            Slow {
                current: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
            },
            2,
        ));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let c = capped.clone();
                s.spawn(move || c.generate("", "").unwrap());
            }
        });
        assert!(capped.inner.peak.load(Ordering::SeqCst) <= 2);
    }
}
