//! Chunking, embedding and filtered cosine retrieval over curated reviews.

mod chunk;
mod embed;
mod store;

pub use chunk::{chunk_review, reconstruct, sentence_spans, Chunk, ChunkSize, DEFAULT_MAX_TOKENS};
pub use embed::{cosine, embed, l2_norm, normalize, Embedding, EmbeddingProvider, HashingEmbedder, RemoteEmbedder};
pub use store::{
    hit_order, parse_entry_line, EntryRecord, IndexEntry, Manifest, PersistFault, RetrievalHit, SearchFilter,
    SharedIndex, VectorIndex,
};

use crate::curation::CuratedReview;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider mismatch: index built with {expected}, got {got}")]
    ProviderMismatch { expected: String, got: String },
    #[error("index persistence: {0}")]
    Persistence(String),
}

impl IndexError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, IndexError::ProviderUnavailable(_))
    }
}

const EMBED_BATCH: usize = 64;

/// Chunks every kept review and embeds the chunks into a fresh index.
pub fn build_index(
    corpus: &[CuratedReview],
    provider: &dyn EmbeddingProvider,
    chunk_size: ChunkSize,
) -> Result<VectorIndex, IndexError> {
    let chunks: Vec<Chunk> = corpus
        .iter()
        .filter(|r| r.is_kept())
        .flat_map(|r| chunk_review(r, chunk_size))
        .collect();
    let mut index = VectorIndex::new(provider.dim(), provider.provider_id());
    for batch in chunks.chunks(EMBED_BATCH) {
        let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
        let embeddings = embed(&texts, provider)?;
        index.upsert(batch.iter().cloned().zip(embeddings))?;
    }
    Ok(index)
}
