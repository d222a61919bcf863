//! Review ingestion from VR stores.
//!
//! Steam exposes a public review endpoint; the Meta Quest store does not, so
//! its pages are scraped with a versioned selector profile. Both paths produce
//! [`RawReview`] records which are written as JSONL, one review per line.

mod scrape;
mod steam;
pub mod transport;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use scrape::{scrape_store_reviews, SelectorProfile};
pub use steam::{fetch_steam_reviews, parse_steam_page, steam_reviews_url, SteamPage, SteamReview};
pub use transport::{
    FetchPolicy, HttpResponse, HttpTransport, RecordingTransport, ReplayTransport, ThrottledTransport,
    Transport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreId {
    MetaQuest,
    Steam,
}

impl StoreId {
    pub fn as_str(self) -> &'static str {
        match self {
            StoreId::MetaQuest => "metaquest",
            StoreId::Steam => "steam",
        }
    }
}

impl fmt::Display for StoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StoreId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "metaquest" => Ok(StoreId::MetaQuest),
            "steam" => Ok(StoreId::Steam),
            other => Err(format!("unknown store {other:?} (expected steam or metaquest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppDescriptor {
    pub store: StoreId,
    pub app_id: String,
    pub title: String,
    #[serde(default)]
    pub official_description: String,
    #[serde(default)]
    pub raw_tags: Vec<String>,
    /// Position in the store's popularity chart at ingest time, 1 = most popular.
    pub popularity_rank: u32,
}

impl AppDescriptor {
    /// `"{store}/{app_id}"`, the key used by category overrides.
    pub fn key(&self) -> String {
        format!("{}/{}", self.store, self.app_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReview {
    pub review_id: String,
    pub app: AppDescriptor,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    pub posted_at: DateTime<Utc>,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("transport failure for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("malformed payload from {context} at byte {offset}: {message}")]
    MalformedPayload {
        context: String,
        offset: usize,
        message: String,
    },
    #[error("rate limited; retry after {retry_after:?}")]
    RateLimited { retry_after: Duration },
    #[error("page layout does not match selector profile: `{name}` ({selector}) found nothing")]
    SelectorProfileMismatch { name: String, selector: String },
    #[error("invalid selector profile: {0}")]
    InvalidProfile(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
}

impl IngestError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, IngestError::Transport { .. } | IngestError::RateLimited { .. })
    }

    pub(crate) fn malformed(context: &str, text: &str, err: &serde_json::Error) -> Self {
        IngestError::MalformedPayload {
            context: context.to_string(),
            offset: byte_offset(text, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

/// The `n` most popular apps: smallest rank first, ties by `(store, app_id)`.
pub fn select_top_apps(catalog: &[AppDescriptor], n: usize) -> Vec<AppDescriptor> {
    let mut sorted: Vec<&AppDescriptor> = catalog.iter().collect();
    sorted.sort_by(|a, b| {
        (a.popularity_rank, a.store, &a.app_id).cmp(&(b.popularity_rank, b.store, &b.app_id))
    });
    sorted.into_iter().take(n).cloned().collect()
}

/// Loads an app catalog (JSONL of [`AppDescriptor`]) and checks its invariants.
pub fn load_catalog(path: &Path) -> Result<Vec<AppDescriptor>, IngestError> {
    let apps: Vec<AppDescriptor> = crate::jsonl::read_jsonl(path)?;
    validate_catalog(&apps)?;
    Ok(apps)
}

pub fn validate_catalog(apps: &[AppDescriptor]) -> Result<(), IngestError> {
    let mut seen = HashSet::new();
    for app in apps {
        if app.app_id.trim().is_empty() {
            return Err(IngestError::InvalidInput("app with empty app_id".into()));
        }
        if app.popularity_rank == 0 {
            return Err(IngestError::InvalidInput(format!(
                "{}: popularity_rank must be >= 1",
                app.key()
            )));
        }
        if !seen.insert((app.store, app.app_id.as_str())) {
            return Err(IngestError::InvalidInput(format!("duplicate app {}", app.key())));
        }
    }
    Ok(())
}

/// Newest first; equal timestamps fall back to review id.
pub(crate) fn sort_newest_first(reviews: &mut [RawReview]) {
    reviews.sort_by(|a, b| b.posted_at.cmp(&a.posted_at).then_with(|| a.review_id.cmp(&b.review_id)));
}

pub struct IngestOptions<'a> {
    pub store: StoreId,
    pub top: usize,
    pub page_limit: u32,
    pub policy: FetchPolicy,
    /// Required for Meta Quest.
    pub profile: Option<&'a SelectorProfile>,
}

/// Fetches reviews for the top apps of one store.
///
/// Apps are fetched on separate threads (the transport's rate limiter keeps
/// per-host spacing); results are concatenated in app selection order so the
/// output does not depend on scheduling.
pub fn ingest_store(
    transport: &dyn Transport,
    catalog: &[AppDescriptor],
    opts: &IngestOptions<'_>,
) -> Result<Vec<RawReview>, IngestError> {
    if opts.page_limit == 0 {
        return Err(IngestError::InvalidInput("page_limit must be >= 1".into()));
    }
    let in_store: Vec<AppDescriptor> = catalog.iter().filter(|a| a.store == opts.store).cloned().collect();
    let apps = select_top_apps(&in_store, opts.top);
    if opts.store == StoreId::MetaQuest && opts.profile.is_none() {
        return Err(IngestError::InvalidInput("metaquest ingestion needs a selector profile".into()));
    }

    let results: Vec<Result<Vec<RawReview>, IngestError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = apps
            .iter()
            .map(|app| scope.spawn(move || fetch_app(transport, app, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(IngestError::InvalidInput("fetcher panicked".into()))))
            .collect()
    });

    let mut corpus = Vec::new();
    for r in results {
        corpus.extend(r?);
    }
    Ok(corpus)
}

fn fetch_app(
    transport: &dyn Transport,
    app: &AppDescriptor,
    opts: &IngestOptions<'_>,
) -> Result<Vec<RawReview>, IngestError> {
    match app.store {
        StoreId::Steam => fetch_steam_reviews(transport, app, opts.page_limit, &opts.policy),
        StoreId::MetaQuest => {
            let profile = opts
                .profile
                .ok_or_else(|| IngestError::InvalidInput("missing selector profile".into()))?;
            let url = profile.page_url(&app.app_id);
            let page = opts.policy.get(transport, &url)?;
            scrape_store_reviews(&page.body, profile, app, page.fetched_at)
        }
    }
}

/// Writes the corpus as JSONL (single writer, replaced atomically).
pub fn write_corpus(path: &Path, reviews: &[RawReview]) -> Result<(), IngestError> {
    crate::jsonl::write_jsonl(path, reviews)?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawReview>, IngestError> {
    Ok(crate::jsonl::read_jsonl(path)?)
}
