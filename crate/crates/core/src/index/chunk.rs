use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::curation::{CuratedReview, DisabilityDimension, VrCategory};
use crate::text::{char_slice, word_count};

pub const DEFAULT_MAX_TOKENS: usize = 120;

/// Upper bound on whitespace tokens per chunk; at least 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSize(usize);

impl ChunkSize {
    pub const MIN: usize = 16;

    pub fn new(max_tokens: usize) -> Option<Self> {
        (max_tokens >= Self::MIN).then_some(Self(max_tokens))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for ChunkSize {
    fn default() -> Self {
        Self(DEFAULT_MAX_TOKENS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// `"{review_id}#{ordinal}"`
    pub chunk_id: String,
    pub review_id: String,
    /// Char offsets `[start, end)` into the normalized review body.
    pub span: (usize, usize),
    pub text: String,
    pub category: VrCategory,
    pub dimensions: BTreeSet<DisabilityDimension>,
    pub app_id: String,
}

/// Sentence spans as char offsets. A sentence ends at `.`, `!` or `?`
/// followed by a space, or at the end of the text; the separating space
/// belongs to neither neighbour.
pub fn sentence_spans(body: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = body.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        let terminal = matches!(chars[i], '.' | '!' | '?');
        if terminal && chars.get(i + 1) == Some(&' ') {
            spans.push((start, i + 1));
            start = i + 2;
        }
    }
    if start < chars.len() {
        spans.push((start, chars.len()));
    }
    spans
}

/// Splits a kept review into chunks of whole sentences.
///
/// Consecutive sentences are merged greedily while the chunk stays within
/// `max_tokens`. A sentence longer than the limit becomes a chunk on its own
/// rather than being cut. Excluded reviews produce no chunks.
pub fn chunk_review(review: &CuratedReview, max_tokens: ChunkSize) -> Vec<Chunk> {
    if !review.is_kept() {
        return Vec::new();
    }
    let body = review.body.as_str();
    let limit = max_tokens.get();

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut current: Option<(usize, usize, usize)> = None; // start, end, tokens
    for (s, e) in sentence_spans(body) {
        let tokens = word_count(char_slice(body, s, e));
        if tokens == 0 {
            // punctuation-only sentence: glue it to whatever is open
            match current.as_mut() {
                Some(cur) => cur.1 = e,
                None => current = Some((s, e, 0)),
            }
            continue;
        }
        current = match current {
            Some((cs, _, ct)) if ct == 0 || ct + tokens <= limit => Some((cs, e, ct + tokens)),
            Some((cs, ce, _)) => {
                groups.push((cs, ce));
                Some((s, e, tokens))
            }
            None => Some((s, e, tokens)),
        };
        if tokens > limit {
            log::warn!(
                "review {}: sentence of {tokens} tokens exceeds chunk limit {limit}; kept whole",
                review.review_id
            );
        }
    }
    if let Some((cs, ce, _)) = current {
        groups.push((cs, ce));
    }

    groups
        .into_iter()
        .enumerate()
        .map(|(ordinal, (s, e))| Chunk {
            chunk_id: format!("{}#{ordinal}", review.review_id),
            review_id: review.review_id.clone(),
            span: (s, e),
            text: char_slice(body, s, e).to_string(),
            category: review.category,
            dimensions: review.dimensions.clone(),
            app_id: review.app.app_id.clone(),
        })
        .collect()
}

/// Rebuilds the review body from its chunks and the separators between them.
pub fn reconstruct(body: &str, chunks: &[Chunk]) -> String {
    let mut out = String::new();
    let mut prev_end = 0;
    for c in chunks {
        out.push_str(char_slice(body, prev_end, c.span.0));
        out.push_str(&c.text);
        prev_end = c.span.1;
    }
    out.push_str(char_slice(body, prev_end, body.chars().count()));
    out
}
