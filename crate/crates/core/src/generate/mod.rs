//! Evidence retrieval and two-stage persona generation.
//!
//! A project context picks a disability dimension (explicitly, or the most
//! prevalent one for its category), retrieves an evidence bundle, asks the
//! provider for an intermediate summary with dimension-value pairs, and then
//! compiles those into a persona. Persona quotes must be verbatim substrings
//! of the retrieved chunks; replies that fail that check are regenerated a
//! bounded number of times and otherwise rejected.

mod engine;
pub mod llm;
mod pipeline;
pub mod prompt;
mod store;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use engine::{DimensionGlosses, GenerationConfig, PersonaEngine};
pub use llm::{ConcurrencyCap, LlmError, LlmProvider, RecordingLlm, RemoteLlm, ReplayLlm, ScriptedLlm};
pub use pipeline::{
    build_evidence, compile_persona, extract_dimension_values, placeholder_photo, recommend_related,
    select_dimension, validate_grounding, GroundingVerdict, PhotoProvider, RelatedMode, DEMOGRAPHIC_KEYS,
    UNSPECIFIED,
};
pub use prompt::PromptTemplates;
pub use store::{valid_persona_id, write_persona_files, PersonaStore};

use crate::curation::{DisabilityDimension, VrCategory};
use crate::index::{IndexError, RetrievalHit};

pub const MAX_DESCRIPTION_CHARS: usize = 2000;
pub const DEFAULT_EVIDENCE_K: usize = 8;
pub const DEFAULT_GROUNDING_RETRIES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectContext {
    pub vr_category: VrCategory,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_dimension: Option<DisabilityDimension>,
}

impl ProjectContext {
    pub fn new(
        vr_category: VrCategory,
        description: impl Into<String>,
        requested_dimension: Option<DisabilityDimension>,
    ) -> Result<Self, GenerateError> {
        let description = description.into();
        let n = description.chars().count();
        if n > MAX_DESCRIPTION_CHARS {
            return Err(GenerateError::InvalidContext(format!(
                "description is {n} characters; the limit is {MAX_DESCRIPTION_CHARS}"
            )));
        }
        Ok(Self {
            vr_category,
            description,
            requested_dimension,
        })
    }
}

/// Retrieved chunks for one (category, dimension) query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub hits: Vec<RetrievalHit>,
    pub dimension: DisabilityDimension,
    pub category: VrCategory,
}

impl EvidenceBundle {
    pub fn chunk_ids(&self) -> Vec<String> {
        self.hits.iter().map(|h| h.chunk.chunk_id.clone()).collect()
    }

    pub fn chunk_text(&self, chunk_id: &str) -> Option<&str> {
        self.hits
            .iter()
            .find(|h| h.chunk.chunk_id == chunk_id)
            .map(|h| h.chunk.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographic {
    pub key: String,
    pub value: String,
}

/// The intermediate representation between evidence and persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionValueRecord {
    pub dimension: DisabilityDimension,
    /// Intermediate user summary.
    pub summary: String,
    pub requirements: Vec<String>,
    pub pain_points: Vec<String>,
    pub demographics: Vec<Demographic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub text: String,
    pub source_chunk_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderTrace {
    pub llm_provider_id: String,
    /// SHA-256 of the compile prompt that produced the accepted reply.
    pub prompt_sha256: String,
    /// SHA-256 over the prompt templates in use.
    pub template_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub persona_id: String,
    pub display_name: String,
    pub photo: Option<String>,
    pub biography: String,
    pub pain_points: Vec<String>,
    pub requirements: Vec<String>,
    pub demographics: Vec<Demographic>,
    pub quotes: Vec<Quote>,
    pub dimension: DisabilityDimension,
    pub vr_category: VrCategory,
    pub evidence_chunk_ids: Vec<String>,
    pub provider_trace: ProviderTrace,
}

/// Thumbnail subset shown in the persona rail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaCard {
    pub persona_id: String,
    pub display_name: String,
    pub dimension: DisabilityDimension,
    pub vr_category: VrCategory,
    pub quote: Quote,
    pub photo: Option<String>,
}

impl Persona {
    pub fn card(&self) -> PersonaCard {
        PersonaCard {
            persona_id: self.persona_id.clone(),
            display_name: self.display_name.clone(),
            dimension: self.dimension,
            vr_category: self.vr_category,
            quote: self.quotes[0].clone(),
            photo: self.photo.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("no evidence: {0}")]
    NoEvidence(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider output did not match the expected schema: {0}")]
    ExtractionParse(String),
    #[error("{} quote(s) not grounded in the evidence after all retries", offending.len())]
    Grounding { offending: Vec<Quote> },
    #[error("invalid project context: {0}")]
    InvalidContext(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Index(IndexError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<IndexError> for GenerateError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::ProviderUnavailable(m) => GenerateError::ProviderUnavailable(m),
            other => GenerateError::Index(other),
        }
    }
}

impl From<LlmError> for GenerateError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Unavailable(m) => GenerateError::ProviderUnavailable(m),
        }
    }
}
