//! Embedding providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::text::fnv1a64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub provider_id: String,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Raw vectors, one per text; [`embed`] normalizes and checks them.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError>;
}

/// L2 norm accumulated in f64.
pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt()
}

pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let n = l2_norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| (f64::from(*x) / n) as f32).collect())
}

/// Embeds texts in order, checking dimensionality and L2-normalizing.
pub fn embed(texts: &[String], provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>, IndexError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let raw = provider.embed_batch(texts)?;
    if raw.len() != texts.len() {
        return Err(IndexError::ProviderUnavailable(format!(
            "{} returned {} vectors for {} texts",
            provider.provider_id(),
            raw.len(),
            texts.len()
        )));
    }
    raw.into_iter()
        .map(|v| {
            if v.len() != provider.dim() {
                return Err(IndexError::DimensionMismatch {
                    expected: provider.dim(),
                    got: v.len(),
                });
            }
            let vector = normalize(&v).ok_or_else(|| {
                IndexError::ProviderUnavailable(format!("{} returned a zero or non-finite vector", provider.provider_id()))
            })?;
            Ok(Embedding {
                vector,
                provider_id: provider.provider_id().to_string(),
            })
        })
        .collect()
}

/// Deterministic offline provider: lowercase alphanumeric tokens hashed
/// (FNV-1a) into `dim` count buckets.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl HashingEmbedder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self {
            dim,
            id: format!("hash-bow-{dim}"),
        }
    }

    pub fn vector(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        let lowered = text.to_lowercase();
        let mut any = false;
        for token in lowered.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[(fnv1a64(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            // token-free text still needs a direction; use the whole trimmed text
            v[(fnv1a64(text.trim().as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f32>>,
}

/// JSON-over-HTTP provider: POST `{"texts": [...]}`, expects `{"vectors": [[...]]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    api_key: Option<String>,
    dim: usize,
    id: String,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub const ENDPOINT_ENV: &'static str = "PERSONA_EMBED_URL";
    pub const KEY_ENV: &'static str = "PERSONA_EMBED_API_KEY";

    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, dim: usize) -> Self {
        let endpoint = endpoint.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            id: format!("remote:{endpoint}"),
            endpoint,
            api_key,
            dim,
            agent,
        }
    }

    /// Endpoint and key from the environment.
    pub fn from_env(dim: usize) -> Result<Self, IndexError> {
        let endpoint = std::env::var(Self::ENDPOINT_ENV)
            .map_err(|_| IndexError::ProviderUnavailable(format!("{} is not set", Self::ENDPOINT_ENV)))?;
        Ok(Self::new(endpoint, std::env::var(Self::KEY_ENV).ok(), dim))
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(RemoteRequest { texts })
            .map_err(|e| IndexError::ProviderUnavailable(format!("embedding request failed: {e}")))?;
        let parsed: RemoteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| IndexError::ProviderUnavailable(format!("embedding response unreadable: {e}")))?;
        Ok(parsed.vectors)
    }
}

/// Cosine similarity; 0 when either side is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let p = HashingEmbedder::default();
        let texts = vec!["Motion sickness everywhere".to_string(), "Motion sickness everywhere".to_string()];
        let e = embed(&texts, &p).unwrap();
        assert_eq!(e[0], e[1]);
        assert_eq!(e[0].dim(), 64);
        assert!((l2_norm(&e[0].vector) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn punctuation_insensitive() {
        let p = HashingEmbedder::default();
        let e = embed(&["motion sickness".to_string(), "motion sickness.".to_string()], &p).unwrap();
        assert!(cosine(&e[0].vector, &e[1].vector) >= 0.9);
    }

    #[test]
    fn punctuation_only_text_still_embeds() {
        let p = HashingEmbedder::default();
        let e = embed(&["!!!".to_string()], &p).unwrap();
        assert!((l2_norm(&e[0].vector) - 1.0).abs() < 1e-6);
    }

    struct WrongDim;

    impl EmbeddingProvider for WrongDim {
        fn provider_id(&self) -> &str {
            "wrong"
        }
        fn dim(&self) -> usize {
            8
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, IndexError> {
            Ok(texts.iter().map(|_| vec![1.0; 4]).collect())
        }
    }

    #[test]
    fn wrong_dimension_rejected() {
        assert!(matches!(
            embed(&["x".to_string()], &WrongDim),
            Err(IndexError::DimensionMismatch { expected: 8, got: 4 })
        ));
    }
}
