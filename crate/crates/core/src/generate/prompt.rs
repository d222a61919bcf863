//! Prompt templates and parsing of provider replies.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DimensionValueRecord, EvidenceBundle, GenerateError, Quote};
use crate::text::sha256_hex;

pub const EVIDENCE_OPEN: &str = "<<<chunk ";
pub const EVIDENCE_CLOSE: &str = "<<<end>>>";
pub const RECORD_HEADER: &str = "RECORD:\n";
pub const REJECTION_HEADER: &str = "YOUR PREVIOUS REPLY WAS REJECTED:";

pub const EXTRACT_SCHEMA: &str = r#"{"summary": string, "dimension": string, "requirements": [string], "pain_points": [string], "demographics": {string: string}}"#;
pub const COMPILE_SCHEMA: &str = r#"{"display_name": string, "biography": string, "quotes": [{"text": string, "source_chunk_id": string}]}"#;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub extract: String,
    pub compile: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            extract: include_str!("../../../../config/templates/extract.txt").to_string(),
            compile: include_str!("../../../../config/templates/compile.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Reads `extract.txt` and `compile.txt` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, GenerateError> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|source| GenerateError::Io { path: p, source })
        };
        Ok(Self {
            extract: read("extract.txt")?,
            compile: read("compile.txt")?,
        })
    }

    /// Hash over both templates; recorded in every persona's trace.
    pub fn fingerprint(&self) -> String {
        sha256_hex(format!("{}\u{0}{}", self.extract, self.compile))
    }

    pub fn render_extract(&self, bundle: &EvidenceBundle) -> String {
        fill(
            &self.extract,
            &[
                ("dimension", bundle.dimension.as_str()),
                ("category", bundle.category.as_str()),
                ("evidence", &render_evidence(bundle)),
            ],
        )
    }

    pub fn render_compile(&self, record: &DimensionValueRecord, bundle: &EvidenceBundle) -> String {
        let record_json = serde_json::to_string_pretty(record).expect("record serializes");
        fill(
            &self.compile,
            &[
                ("dimension", bundle.dimension.as_str()),
                ("category", bundle.category.as_str()),
                ("record", &record_json),
                ("evidence", &render_evidence(bundle)),
            ],
        )
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

pub fn render_evidence(bundle: &EvidenceBundle) -> String {
    let mut out = String::new();
    for hit in &bundle.hits {
        out.push_str(EVIDENCE_OPEN);
        out.push_str(&hit.chunk.chunk_id);
        out.push_str(">>>\n");
        out.push_str(&hit.chunk.text);
        out.push('\n');
        out.push_str(EVIDENCE_CLOSE);
        out.push('\n');
    }
    out
}

/// `(chunk_id, text)` pairs from a rendered prompt.
pub fn parse_evidence(prompt: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = prompt;
    while let Some(start) = rest.find(EVIDENCE_OPEN) {
        let after = &rest[start + EVIDENCE_OPEN.len()..];
        let Some(id_end) = after.find(">>>\n") else { break };
        let id = &after[..id_end];
        let body = &after[id_end + 4..];
        let Some(close) = body.find(EVIDENCE_CLOSE) else { break };
        out.push((id.to_string(), body[..close].trim_end_matches('\n').to_string()));
        rest = &body[close + EVIDENCE_CLOSE.len()..];
    }
    out
}

/// Appends a correction request to a prompt for the next attempt.
pub fn with_rejection(prompt: &str, reason: &str) -> String {
    format!("{prompt}\n\n{REJECTION_HEADER} {reason}\nReply again with a corrected JSON object only.\n")
}

/// Slices the outermost `{...}` out of a reply, tolerating code fences and chatter.
fn json_object(text: &str) -> Result<&str, String> {
    let start = text.find('{').ok_or("reply contains no JSON object")?;
    let end = text.rfind('}').ok_or("reply contains no JSON object")?;
    if end < start {
        return Err("reply contains no JSON object".into());
    }
    Ok(&text[start..=end])
}

fn clean_list(items: Vec<String>) -> Vec<String> {
    items
        .into_iter()
        .map(|s| crate::text::normalize_ws(&s))
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReply {
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub dimension: Option<String>,
    #[serde(default)]
    pub requirements: Vec<String>,
    #[serde(default)]
    pub pain_points: Vec<String>,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
}

/// Parses an extraction reply; empty requirement or pain-point lists are schema violations.
pub fn parse_extraction(text: &str) -> Result<ExtractionReply, String> {
    let mut reply: ExtractionReply = serde_json::from_str(json_object(text)?).map_err(|e| e.to_string())?;
    reply.requirements = clean_list(reply.requirements);
    reply.pain_points = clean_list(reply.pain_points);
    reply.summary = crate::text::normalize_ws(&reply.summary);
    if reply.requirements.is_empty() {
        return Err("requirements must contain at least one entry".into());
    }
    if reply.pain_points.is_empty() {
        return Err("pain_points must contain at least one entry".into());
    }
    Ok(reply)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReply {
    pub display_name: String,
    pub biography: String,
    pub quotes: Vec<Quote>,
}

pub fn parse_compile(text: &str) -> Result<CompileReply, String> {
    let mut reply: CompileReply = serde_json::from_str(json_object(text)?).map_err(|e| e.to_string())?;
    reply.display_name = crate::text::normalize_ws(&reply.display_name);
    reply.biography = crate::text::normalize_ws(&reply.biography);
    if reply.display_name.is_empty() {
        return Err("display_name is empty".into());
    }
    if reply.biography.is_empty() {
        return Err("biography is empty".into());
    }
    if reply.quotes.is_empty() {
        return Err("quotes must contain at least one entry".into());
    }
    Ok(reply)
}

/// Parses the record JSON embedded in a compile prompt.
pub fn parse_record_section(prompt: &str) -> Option<DimensionValueRecord> {
    let start = prompt.find(RECORD_HEADER)? + RECORD_HEADER.len();
    let rest = &prompt[start..];
    let end = rest.find("\n\nEVIDENCE:")?;
    serde_json::from_str(&rest[..end]).ok()
}
