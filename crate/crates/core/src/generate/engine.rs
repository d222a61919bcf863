use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::llm::LlmProvider;
use super::pipeline::{
    build_evidence, compile_persona, extract_dimension_values, recommend_related, select_dimension, PhotoProvider,
    RelatedMode,
};
use super::prompt::PromptTemplates;
use super::{EvidenceBundle, GenerateError, Persona, ProjectContext, DEFAULT_EVIDENCE_K, DEFAULT_GROUNDING_RETRIES};
use crate::curation::{DisabilityDimension, Prevalence};
use crate::index::{EmbeddingProvider, SharedIndex};

/// Per-dimension phrase appended to retrieval queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionGlosses(BTreeMap<DisabilityDimension, String>);

#[derive(Deserialize)]
struct GlossFile {
    glosses: BTreeMap<String, String>,
}

impl DimensionGlosses {
    pub fn from_toml_str(text: &str) -> Result<Self, GenerateError> {
        let file: GlossFile =
            toml::from_str(text).map_err(|e| GenerateError::InvalidContext(format!("glosses: {e}")))?;
        let mut map = BTreeMap::new();
        for (key, gloss) in file.glosses {
            let dim: DisabilityDimension = key
                .parse()
                .map_err(|_| GenerateError::InvalidContext(format!("glosses: unknown dimension {key:?}")))?;
            map.insert(dim, gloss);
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, GenerateError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenerateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn builtin() -> Self {
        Self::from_toml_str(include_str!("../../../../config/glosses.toml")).expect("bundled glosses are valid")
    }

    /// Empty for dimensions without a gloss.
    pub fn get(&self, dimension: DisabilityDimension) -> &str {
        self.0.get(&dimension).map(String::as_str).unwrap_or("")
    }
}

impl Default for DimensionGlosses {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationConfig {
    pub k: usize,
    pub grounding_retries: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_EVIDENCE_K,
            grounding_retries: DEFAULT_GROUNDING_RETRIES,
        }
    }
}

/// Everything needed to turn a project context into a persona.
#[derive(Clone)]
pub struct PersonaEngine {
    pub index: SharedIndex,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub llm: Arc<dyn LlmProvider>,
    pub photo: Option<Arc<dyn PhotoProvider>>,
    pub prevalence: Prevalence,
    pub glosses: DimensionGlosses,
    pub templates: PromptTemplates,
    pub config: GenerationConfig,
}

impl PersonaEngine {
    pub fn new(
        index: SharedIndex,
        embedder: Arc<dyn EmbeddingProvider>,
        llm: Arc<dyn LlmProvider>,
        prevalence: Prevalence,
    ) -> Self {
        Self {
            index,
            embedder,
            llm,
            photo: None,
            prevalence,
            glosses: DimensionGlosses::builtin(),
            templates: PromptTemplates::default(),
            config: GenerationConfig::default(),
        }
    }

    pub fn evidence(&self, ctx: &ProjectContext) -> Result<EvidenceBundle, GenerateError> {
        let dimension = select_dimension(ctx, &self.prevalence)?;
        let index = self.index.snapshot();
        build_evidence(
            ctx,
            dimension,
            self.glosses.get(dimension),
            &index,
            self.embedder.as_ref(),
            self.config.k,
        )
    }

    pub fn generate(&self, ctx: &ProjectContext) -> Result<Persona, GenerateError> {
        let bundle = self.evidence(ctx)?;
        self.generate_from_bundle(&bundle)
    }

    pub fn generate_from_bundle(&self, bundle: &EvidenceBundle) -> Result<Persona, GenerateError> {
        let record = extract_dimension_values(bundle, self.llm.as_ref(), &self.templates)?;
        compile_persona(
            &record,
            bundle,
            self.llm.as_ref(),
            self.photo.as_deref(),
            &self.templates,
            self.config.grounding_retries,
        )
    }

    pub fn related(
        &self,
        persona: &Persona,
        mode: &RelatedMode,
        k: usize,
    ) -> Result<Vec<EvidenceBundle>, GenerateError> {
        let index = self.index.snapshot();
        recommend_related(persona, &index, self.embedder.as_ref(), mode, k, self.config.k)
    }

    pub fn provider_ids(&self) -> Vec<String> {
        let mut ids = vec![self.embedder.provider_id().to_string(), self.llm.provider_id().to_string()];
        if let Some(p) = &self.photo {
            ids.push(p.provider_id().to_string());
        }
        ids
    }
}
