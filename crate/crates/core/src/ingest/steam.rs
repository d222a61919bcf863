//! Client for Steam's public `appreviews` endpoint.

use std::collections::HashMap;

use chrono::DateTime;
use serde::{Deserialize, Deserializer};

use super::transport::{FetchPolicy, Transport};
use super::{sort_newest_first, AppDescriptor, IngestError, RawReview};

const ENDPOINT: &str = "https://store.steampowered.com/appreviews";

#[derive(Debug, Clone, Deserialize)]
pub struct SteamPage {
    pub success: i64,
    #[serde(default)]
    pub reviews: Vec<SteamReview>,
    #[serde(default)]
    pub cursor: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SteamReview {
    #[serde(deserialize_with = "string_or_number")]
    pub recommendationid: String,
    pub review: String,
    pub timestamp_created: i64,
    #[serde(default)]
    pub voted_up: Option<bool>,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

/// Parses one page of the endpoint's JSON. Errors carry the byte offset.
pub fn parse_steam_page(body: &str) -> Result<SteamPage, IngestError> {
    let page: SteamPage =
        serde_json::from_str(body).map_err(|e| IngestError::malformed("steam appreviews", body, &e))?;
    if page.success != 1 {
        return Err(IngestError::MalformedPayload {
            context: "steam appreviews".into(),
            offset: body.find("\"success\"").unwrap_or(0),
            message: format!("success = {}", page.success),
        });
    }
    Ok(page)
}

pub fn steam_reviews_url(app_id: &str, cursor: &str) -> String {
    let mut url = url::Url::parse(ENDPOINT).expect("static endpoint");
    url.path_segments_mut().expect("base url").push(app_id);
    url.query_pairs_mut()
        .append_pair("json", "1")
        .append_pair("filter", "recent")
        .append_pair("language", "english")
        .append_pair("num_per_page", "100")
        .append_pair("cursor", cursor);
    url.into()
}

/// Follows the review cursor until it is exhausted, stops repeating, or
/// `page_limit` pages have been read. Reviews are deduplicated by id and
/// returned newest first.
pub fn fetch_steam_reviews(
    transport: &dyn Transport,
    app: &AppDescriptor,
    page_limit: u32,
    policy: &FetchPolicy,
) -> Result<Vec<RawReview>, IngestError> {
    if app.app_id.trim().is_empty() {
        return Err(IngestError::InvalidInput("empty steam app_id".into()));
    }
    if page_limit == 0 {
        return Err(IngestError::InvalidInput("page_limit must be >= 1".into()));
    }
    let mut by_id: HashMap<String, RawReview> = HashMap::new();
    let mut cursor = String::from("*");
    for _ in 0..page_limit {
        let url = steam_reviews_url(&app.app_id, &cursor);
        let resp = policy.get(transport, &url)?;
        let page = parse_steam_page(&resp.body)?;
        if page.reviews.is_empty() {
            break;
        }
        for r in page.reviews {
            if r.review.trim().is_empty() {
                continue;
            }
            let posted_at = DateTime::from_timestamp(r.timestamp_created, 0).ok_or_else(|| {
                IngestError::MalformedPayload {
                    context: "steam appreviews".into(),
                    offset: resp.body.find(&r.recommendationid).unwrap_or(0),
                    message: format!("timestamp_created {} out of range", r.timestamp_created),
                }
            })?;
            if posted_at > resp.fetched_at {
                log::warn!(
                    "skipping steam review {}: posted after fetch time",
                    r.recommendationid
                );
                continue;
            }
            by_id.entry(r.recommendationid.clone()).or_insert(RawReview {
                review_id: r.recommendationid,
                app: app.clone(),
                body: r.review,
                rating: r.voted_up.map(|up| if up { 1.0 } else { 0.0 }),
                posted_at,
                fetched_at: resp.fetched_at,
            });
        }
        match page.cursor {
            Some(next) if !next.is_empty() && next != cursor => cursor = next,
            _ => break,
        }
    }
    let mut out: Vec<RawReview> = by_id.into_values().collect();
    sort_newest_first(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::transport::HttpResponse;
    use crate::ingest::StoreId;
    use std::sync::Mutex;

    #[test]
    fn url_shape() {
        assert_eq!(
            steam_reviews_url("617830", "*"),
            "https://store.steampowered.com/appreviews/617830?json=1&filter=recent&language=english&num_per_page=100&cursor=*"
        );
        assert!(steam_reviews_url("1", "AoJ+x=").ends_with("cursor=AoJ%2Bx%3D"));
    }

    #[test]
    fn malformed_reports_offset() {
        let body = "{\"success\":1,\n\"reviews\": [ {\"recommendationid\": }";
        match parse_steam_page(body) {
            Err(IngestError::MalformedPayload { offset, .. }) => {
                assert!(offset > 14 && offset <= body.len(), "offset {offset}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsuccessful_page_is_malformed() {
        assert!(matches!(
            parse_steam_page(r#"{"success":2}"#),
            Err(IngestError::MalformedPayload { .. })
        ));
    }

    #[test]
    fn numeric_ids_accepted() {
        let p = parse_steam_page(
            r#"{"success":1,"reviews":[{"recommendationid":42,"review":"x","timestamp_created":1}]}"#,
        )
        .unwrap();
        assert_eq!(p.reviews[0].recommendationid, "42");
    }

    struct Pages(Mutex<Vec<String>>);

    impl Transport for Pages {
        fn get(&self, _url: &str) -> Result<HttpResponse, IngestError> {
            let mut pages = self.0.lock().unwrap();
            let body = if pages.is_empty() { r#"{"success":1,"reviews":[]}"#.to_string() } else { pages.remove(0) };
            Ok(HttpResponse {
                status: 200,
                retry_after_secs: None,
                fetched_at: DateTime::from_timestamp(1_800_000_000, 0).unwrap(),
                body,
            })
        }
    }

    fn app() -> AppDescriptor {
        AppDescriptor {
            store: StoreId::Steam,
            app_id: "1".into(),
            title: "t".into(),
            official_description: String::new(),
            raw_tags: vec![],
            popularity_rank: 1,
        }
    }

    #[test]
    fn follows_cursor_and_dedups() {
        let p1 = r#"{"success":1,"cursor":"c2","reviews":[
            {"recommendationid":"a","review":"one","timestamp_created":100},
            {"recommendationid":"b","review":"two","timestamp_created":300}]}"#;
        let p2 = r#"{"success":1,"cursor":"c3","reviews":[
            {"recommendationid":"b","review":"two","timestamp_created":300},
            {"recommendationid":"c","review":"three","timestamp_created":200,"voted_up":false}]}"#;
        let t = Pages(Mutex::new(vec![p1.into(), p2.into()]));
        let out = fetch_steam_reviews(&t, &app(), 5, &FetchPolicy::immediate()).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.review_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert_eq!(out[1].rating, Some(0.0));
        assert_eq!(out[0].rating, None);
    }

    #[test]
    fn page_limit_stops_early() {
        let p1 = r#"{"success":1,"cursor":"c2","reviews":[{"recommendationid":"a","review":"one","timestamp_created":100}]}"#;
        let p2 = r#"{"success":1,"cursor":"c3","reviews":[{"recommendationid":"z","review":"two","timestamp_created":100}]}"#;
        let t = Pages(Mutex::new(vec![p1.into(), p2.into()]));
        let out = fetch_steam_reviews(&t, &app(), 1, &FetchPolicy::immediate()).unwrap();
        assert_eq!(out.len(), 1);
    }
}
