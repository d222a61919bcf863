#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use persona_core::curation::{
    curate, prevalence, CategoryRules, CuratedReview, CurationRules, DenyLists, KeywordLexicon, Prevalence,
};
use persona_core::generate::{PersonaEngine, ScriptedLlm};
use persona_core::index::{build_index, ChunkSize, HashingEmbedder, SharedIndex, VectorIndex};
use persona_core::ingest::{
    ingest_store, load_catalog, FetchPolicy, IngestOptions, RawReview, ReplayTransport, SelectorProfile, StoreId,
};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn config_dir() -> PathBuf {
    repo_root().join("config")
}

pub fn fixtures_dir() -> PathBuf {
    repo_root().join("fixtures")
}

pub fn rules() -> CurationRules {
    let cfg = config_dir();
    CurationRules {
        lexicon: KeywordLexicon::load(&cfg.join("lexicon.toml")).unwrap(),
        categories: CategoryRules::load(&cfg.join("categories.toml")).unwrap(),
        deny: DenyLists::load_dir(&cfg.join("deny")).unwrap(),
    }
}

/// Both stores from the recorded store dump, Steam first.
pub fn ingest_fixture_store() -> Vec<RawReview> {
    let store = fixtures_dir().join("store");
    let catalog = load_catalog(&store.join("apps.jsonl")).unwrap();
    let transport = ReplayTransport::new(store.join("http"));
    let profile = SelectorProfile::load(&config_dir().join("selectors/metaquest.toml")).unwrap();
    let mut corpus = Vec::new();
    for store_id in [StoreId::Steam, StoreId::MetaQuest] {
        let opts = IngestOptions {
            store: store_id,
            top: 50,
            page_limit: 10,
            policy: FetchPolicy::immediate(),
            profile: Some(&profile),
        };
        corpus.extend(ingest_store(&transport, &catalog, &opts).unwrap());
    }
    corpus
}

pub fn curated_fixture_store() -> Vec<CuratedReview> {
    curate(&ingest_fixture_store(), &rules()).unwrap()
}

pub fn hashing_index(corpus: &[CuratedReview]) -> VectorIndex {
    build_index(corpus, &HashingEmbedder::default(), ChunkSize::default()).unwrap()
}

pub fn mock_engine(corpus: &[CuratedReview]) -> PersonaEngine {
    let prev: Prevalence = prevalence(corpus);
    PersonaEngine::new(
        SharedIndex::new(hashing_index(corpus)),
        Arc::new(HashingEmbedder::default()),
        Arc::new(ScriptedLlm),
        prev,
    )
}

pub fn raw_300() -> Vec<RawReview> {
    persona_core::ingest::read_corpus(&fixtures_dir().join("curation/raw_300.jsonl")).unwrap()
}
