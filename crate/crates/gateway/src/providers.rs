use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};

use persona_core::curation::{prevalence, CuratedReview, Prevalence};
use persona_core::generate::{
    ConcurrencyCap, DimensionGlosses, GenerationConfig, LlmProvider, PersonaEngine, PromptTemplates, RecordingLlm,
    RemoteLlm, ReplayLlm, ScriptedLlm,
};
use persona_core::index::{EmbeddingProvider, HashingEmbedder, RemoteEmbedder, SharedIndex, VectorIndex};

use crate::config::{EmbedBackend, GatewayConfig, LlmBackend};

pub fn embedder(backend: EmbedBackend, dim: usize) -> anyhow::Result<Arc<dyn EmbeddingProvider>> {
    Ok(match backend {
        EmbedBackend::Test => Arc::new(HashingEmbedder::new(dim)),
        EmbedBackend::Remote => Arc::new(RemoteEmbedder::from_env(dim)?),
    })
}

pub fn llm(backend: LlmBackend, fixtures: Option<&Path>) -> anyhow::Result<Arc<dyn LlmProvider>> {
    Ok(match (backend, fixtures) {
        (LlmBackend::Mock, _) => Arc::new(ScriptedLlm),
        (LlmBackend::Replay, Some(dir)) => Arc::new(ReplayLlm::new(dir)),
        (LlmBackend::Replay, None) => bail!("replaying completions needs a fixture directory"),
        (LlmBackend::Remote, dir) => {
            let remote = RemoteLlm::from_env()?;
            match dir {
                Some(dir) => Arc::new(ConcurrencyCap::new(RecordingLlm::new(remote, dir), ConcurrencyCap::<RemoteLlm>::DEFAULT_LIMIT)),
                None => Arc::new(ConcurrencyCap::new(remote, ConcurrencyCap::<RemoteLlm>::DEFAULT_LIMIT)),
            }
        }
    })
}

pub fn load_curated(path: &Path) -> anyhow::Result<Vec<CuratedReview>> {
    persona_core::jsonl::read_jsonl(path).with_context(|| format!("reading curated corpus {}", path.display()))
}

pub fn load_index(dir: &Path) -> anyhow::Result<VectorIndex> {
    VectorIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))
}

/// Everything generation needs, checked for provider consistency.
pub struct Loaded {
    pub engine: PersonaEngine,
    pub index: SharedIndex,
    pub prevalence: Prevalence,
}

pub fn load_engine(cfg: &GatewayConfig) -> anyhow::Result<Loaded> {
    let index = load_index(&cfg.index_dir)?;
    let embedder = embedder(cfg.embedder, index.dim())?;
    if embedder.provider_id() != index.provider_id() {
        bail!(
            "index {} was built with {} but the configured embedder is {}",
            cfg.index_dir.display(),
            index.provider_id(),
            embedder.provider_id()
        );
    }
    let prevalence = prevalence(&load_curated(&cfg.corpus)?);
    let shared = SharedIndex::new(index);
    let mut engine = PersonaEngine::new(shared.clone(), embedder, llm(cfg.llm, cfg.llm_fixtures.as_deref())?, prevalence.clone());
    if let Some(dir) = &cfg.templates_dir {
        engine.templates = PromptTemplates::load_dir(dir)?;
    }
    if let Some(path) = &cfg.glosses {
        engine.glosses = DimensionGlosses::load(path)?;
    }
    engine.config = GenerationConfig {
        k: cfg.k,
        grounding_retries: cfg.grounding_retries,
    };
    Ok(Loaded {
        engine,
        index: shared,
        prevalence,
    })
}
