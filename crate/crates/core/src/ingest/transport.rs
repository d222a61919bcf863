//! HTTP access for the store fetchers: a live client, fixture replay and
//! recording, and a per-host rate limiter.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::text::sha256_hex;

/// A fetched document plus the metadata the fetchers care about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_secs: Option<u64>,
    pub fetched_at: DateTime<Utc>,
    pub body: String,
}

impl HttpResponse {
    /// Maps 429 to `RateLimited` and any other non-2xx status to `Transport`.
    pub fn check(self, url: &str) -> Result<Self, IngestError> {
        match self.status {
            200..=299 => Ok(self),
            429 => Err(IngestError::RateLimited {
                retry_after: Duration::from_secs(self.retry_after_secs.unwrap_or(1)),
            }),
            status => Err(IngestError::Transport {
                url: url.to_string(),
                message: format!("HTTP {status}"),
            }),
        }
    }
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError>;
}

/// Live HTTP client.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent("persona-ingest/0.1")
            .build()
            .into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let transport_err = |e: ureq::Error| IngestError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        };
        let mut resp = self.agent.get(url).call().map_err(transport_err)?;
        let retry_after_secs = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse().ok());
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport_err)?;
        Ok(HttpResponse {
            status,
            retry_after_secs,
            fetched_at: Utc::now(),
            body,
        })
    }
}

/// One recorded request/response pair on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedExchange {
    pub url: String,
    #[serde(flatten)]
    pub response: HttpResponse,
}

/// File name for a URL inside a fixture directory.
pub fn fixture_key(url: &str) -> String {
    format!("{}.json", &sha256_hex(url)[..24])
}

/// Serves responses from a fixture directory; never touches the network.
pub struct ReplayTransport {
    dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Transport for ReplayTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let path = self.dir.join(fixture_key(url));
        let text = fs::read_to_string(&path).map_err(|e| IngestError::Transport {
            url: url.to_string(),
            message: format!("no recorded fixture at {}: {e}", path.display()),
        })?;
        let exchange: RecordedExchange =
            serde_json::from_str(&text).map_err(|e| IngestError::malformed(&path.display().to_string(), &text, &e))?;
        if exchange.url != url {
            return Err(IngestError::Transport {
                url: url.to_string(),
                message: format!("fixture {} was recorded for {}", path.display(), exchange.url),
            });
        }
        Ok(exchange.response)
    }
}

/// Passes requests through and writes every exchange into `dir`.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }

    fn save(&self, url: &str, response: &HttpResponse) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let exchange = RecordedExchange {
            url: url.to_string(),
            response: response.clone(),
        };
        let json = serde_json::to_string_pretty(&exchange).map_err(std::io::Error::other)?;
        fs::write(self.dir.join(fixture_key(url)), json)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let response = self.inner.get(url)?;
        self.save(url, &response).map_err(|e| IngestError::Io {
            path: self.dir.clone(),
            source: e,
        })?;
        Ok(response)
    }
}

/// Token bucket of capacity one per host: requests to the same host are
/// spaced at least `min_interval` apart, other hosts are unaffected.
pub struct HostRateLimiter {
    min_interval: Duration,
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HostRateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            next_slot: Mutex::new(HashMap::new()),
        }
    }

    /// Blocks until the caller may issue a request to `host`.
    pub fn acquire(&self, host: &str) {
        if self.min_interval.is_zero() {
            return;
        }
        let slot = {
            let mut slots = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = slots.get(host).copied().filter(|s| *s > now).unwrap_or(now);
            slots.insert(host.to_string(), slot + self.min_interval);
            slot
        };
        let wait = slot.saturating_duration_since(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Applies a `HostRateLimiter` in front of another transport.
pub struct ThrottledTransport<T> {
    inner: T,
    limiter: HostRateLimiter,
}

impl<T: Transport> ThrottledTransport<T> {
    pub fn new(inner: T, min_interval: Duration) -> Self {
        Self {
            inner,
            limiter: HostRateLimiter::new(min_interval),
        }
    }
}

impl<T: Transport> Transport for ThrottledTransport<T> {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let host = url::Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        self.limiter.acquire(&host);
        self.inner.get(url)
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        (**self).get(url)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        (**self).get(url)
    }
}

/// Retry behaviour for `RateLimited` responses.
#[derive(Debug, Clone)]
pub struct FetchPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            base_backoff: Duration::from_secs(1),
            max_backoff: Duration::from_secs(60),
        }
    }
}

impl FetchPolicy {
    /// No waiting at all; used for replayed fixtures and tests.
    pub fn immediate() -> Self {
        Self {
            max_retries: 4,
            base_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
        }
    }

    /// GET with exponential backoff on `RateLimited`, honoring the server's
    /// retry-after when it asks for longer.
    pub fn get(&self, transport: &dyn Transport, url: &str) -> Result<HttpResponse, IngestError> {
        let mut attempt = 0;
        loop {
            match transport.get(url).and_then(|r| r.check(url)) {
                Err(IngestError::RateLimited { retry_after }) if attempt < self.max_retries => {
                    let backoff = self
                        .base_backoff
                        .saturating_mul(1 << attempt.min(16))
                        .min(self.max_backoff);
                    let wait = if self.max_backoff.is_zero() {
                        Duration::ZERO
                    } else {
                        backoff.max(retry_after).min(self.max_backoff)
                    };
                    log::warn!("rate limited on {url}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
