//! Selector-profile driven scraper for store pages without a public API.

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use super::{sort_newest_first, AppDescriptor, IngestError, RawReview, StoreId};
use crate::text::sha256_hex;

/// CSS selectors describing one store page layout. Layouts drift, so these
/// live in a versioned TOML file rather than in code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorProfile {
    pub version: String,
    pub store: StoreId,
    /// Page URL with an `{app_id}` placeholder.
    pub url_template: String,
    /// Container that must exist on any review page.
    pub list: String,
    pub block: String,
    pub body: String,
    #[serde(default)]
    pub rating: Option<String>,
    #[serde(default)]
    pub rating_attr: Option<String>,
    pub timestamp: String,
    #[serde(default)]
    pub timestamp_attr: Option<String>,
    /// Attribute on the block carrying the store's review id.
    #[serde(default)]
    pub review_id_attr: Option<String>,
}

struct Compiled {
    list: Selector,
    block: Selector,
    body: Selector,
    rating: Option<Selector>,
    timestamp: Selector,
}

impl SelectorProfile {
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let profile: SelectorProfile =
            toml::from_str(text).map_err(|e| IngestError::InvalidProfile(e.to_string()))?;
        profile.compile()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn page_url(&self, app_id: &str) -> String {
        self.url_template.replace("{app_id}", app_id)
    }

    fn compile(&self) -> Result<Compiled, IngestError> {
        let sel = |name: &str, s: &str| {
            Selector::parse(s).map_err(|e| IngestError::InvalidProfile(format!("{name} selector {s:?}: {e}")))
        };
        Ok(Compiled {
            list: sel("list", &self.list)?,
            block: sel("block", &self.block)?,
            body: sel("body", &self.body)?,
            rating: self.rating.as_deref().map(|s| sel("rating", s)).transpose()?,
            timestamp: sel("timestamp", &self.timestamp)?,
        })
    }
}

fn mismatch(name: &str, selector: &str) -> IngestError {
    IngestError::SelectorProfileMismatch {
        name: name.to_string(),
        selector: selector.to_string(),
    }
}

fn element_text(el: ElementRef<'_>) -> String {
    crate::text::normalize_ws(&el.text().collect::<String>())
}

/// Extracts reviews from one fetched page.
///
/// Body and timestamp are required per block; a missing rating is recorded as
/// absent. Blocks without a store review id get a content-derived id that is
/// stable across re-fetches of the same review.
pub fn scrape_store_reviews(
    html: &str,
    profile: &SelectorProfile,
    app: &AppDescriptor,
    fetched_at: DateTime<Utc>,
) -> Result<Vec<RawReview>, IngestError> {
    if profile.store != StoreId::MetaQuest || app.store != StoreId::MetaQuest {
        return Err(IngestError::InvalidInput(format!(
            "scraper handles metaquest pages only (profile {}, app {})",
            profile.store,
            app.key()
        )));
    }
    let sel = profile.compile()?;
    let doc = Html::parse_document(html);
    let list = doc.select(&sel.list).next().ok_or_else(|| mismatch("list", &profile.list))?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for block in list.select(&sel.block) {
        let body = block
            .select(&sel.body)
            .next()
            .map(element_text)
            .ok_or_else(|| mismatch("body", &profile.body))?;
        if body.is_empty() {
            continue;
        }
        let ts_el = block
            .select(&sel.timestamp)
            .next()
            .ok_or_else(|| mismatch("timestamp", &profile.timestamp))?;
        let ts_raw = match &profile.timestamp_attr {
            Some(attr) => ts_el
                .value()
                .attr(attr)
                .map(str::to_string)
                .ok_or_else(|| mismatch("timestamp_attr", attr))?,
            None => element_text(ts_el),
        };
        let posted_at = parse_timestamp(&ts_raw).ok_or_else(|| malformed(html, &ts_raw, "unparseable timestamp"))?;

        let rating = match &sel.rating {
            Some(rsel) => match block.select(rsel).next() {
                Some(el) => {
                    let raw = match &profile.rating_attr {
                        Some(attr) => el.value().attr(attr).map(str::to_string),
                        None => Some(element_text(el)),
                    };
                    match raw {
                        Some(raw) => Some(
                            leading_number(&raw).ok_or_else(|| malformed(html, &raw, "unparseable rating"))?,
                        ),
                        None => None,
                    }
                }
                None => None,
            },
            None => None,
        };

        if posted_at > fetched_at {
            log::warn!("skipping review posted after fetch time on {}", app.key());
            continue;
        }
        let review_id = profile
            .review_id_attr
            .as_deref()
            .and_then(|attr| block.value().attr(attr))
            .map(str::to_string)
            .unwrap_or_else(|| {
                let digest = sha256_hex(format!("{}\n{}\n{}", app.app_id, posted_at.to_rfc3339(), body));
                format!("mq-{}", &digest[..16])
            });
        if !seen.insert(review_id.clone()) {
            continue;
        }
        out.push(RawReview {
            review_id,
            app: app.clone(),
            body,
            rating,
            posted_at,
            fetched_at,
        });
    }
    sort_newest_first(&mut out);
    Ok(out)
}

fn malformed(html: &str, needle: &str, message: &str) -> IngestError {
    IngestError::MalformedPayload {
        context: "store page".into(),
        offset: html.find(needle).unwrap_or(0),
        message: format!("{message}: {needle:?}"),
    }
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

/// First decimal number in the text ("4 out of 5 stars" -> 4).
fn leading_number(raw: &str) -> Option<f64> {
    let start = raw.find(|c: char| c.is_ascii_digit())?;
    let rest = &raw[start..];
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(rest.len());
    rest[..end].trim_end_matches('.').parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROFILE: &str = r#"
version = "test-1"
store = "metaquest"
url_template = "https://www.meta.com/experiences/{app_id}/"
list = "section.reviews"
block = "article.review"
body = "p.body"
rating = "span.stars"
rating_attr = "data-rating"
timestamp = "time"
timestamp_attr = "datetime"
review_id_attr = "data-review-id"
"#;

    fn app() -> AppDescriptor {
        AppDescriptor {
            store: StoreId::MetaQuest,
            app_id: "123".into(),
            title: "Climb".into(),
            official_description: String::new(),
            raw_tags: vec![],
            popularity_rank: 1,
        }
    }

    fn fetched() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2025-01-01T00:00:00Z").unwrap().with_timezone(&Utc)
    }

    #[test]
    fn bad_selector_rejected_at_load() {
        let bad = PROFILE.replace("p.body", "p[");
        assert!(matches!(SelectorProfile::from_toml_str(&bad), Err(IngestError::InvalidProfile(_))));
    }

    #[test]
    fn missing_list_names_selector() {
        let p = SelectorProfile::from_toml_str(PROFILE).unwrap();
        match scrape_store_reviews("<html><body><div>redesigned</div></body></html>", &p, &app(), fetched()) {
            Err(IngestError::SelectorProfileMismatch { name, selector }) => {
                assert_eq!(name, "list");
                assert_eq!(selector, "section.reviews");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn derived_ids_are_stable() {
        let p = SelectorProfile::from_toml_str(&PROFILE.replace("review_id_attr = \"data-review-id\"\n", "")).unwrap();
        let html = r#"<section class="reviews"><article class="review">
            <time datetime="2024-05-01T12:00:00Z"></time><p class="body">Nice  game</p></article></section>"#;
        let a = scrape_store_reviews(html, &p, &app(), fetched()).unwrap();
        let b = scrape_store_reviews(html, &p, &app(), fetched()).unwrap();
        assert_eq!(a[0].review_id, b[0].review_id);
        assert!(a[0].review_id.starts_with("mq-"));
        assert_eq!(a[0].body, "Nice game");
    }

    #[test]
    fn unparseable_rating_is_malformed() {
        let p = SelectorProfile::from_toml_str(PROFILE).unwrap();
        let html = r#"<section class="reviews"><article class="review" data-review-id="r1">
            <span class="stars" data-rating="lots"></span>
            <time datetime="2024-05-01T12:00:00Z"></time><p class="body">x</p></article></section>"#;
        assert!(matches!(
            scrape_store_reviews(html, &p, &app(), fetched()),
            Err(IngestError::MalformedPayload { .. })
        ));
    }

    #[test]
    fn rating_text_parsing() {
        assert_eq!(leading_number("4 out of 5 stars"), Some(4.0));
        assert_eq!(leading_number("Rated 3.5."), Some(3.5));
        assert_eq!(leading_number("none"), None);
    }

    #[test]
    fn date_only_timestamps() {
        assert_eq!(parse_timestamp("2024-02-03").unwrap().to_rfc3339(), "2024-02-03T00:00:00+00:00");
        assert!(parse_timestamp("yesterday").is_none());
    }
}
