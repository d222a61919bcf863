#![no_main]

use libfuzzer_sys::fuzz_target;

use std::sync::OnceLock;

use chrono::{TimeZone, Utc};
use persona_core::ingest::{scrape_store_reviews, AppDescriptor, SelectorProfile, StoreId};

fn profile() -> &'static SelectorProfile {
    static P: OnceLock<SelectorProfile> = OnceLock::new();
    P.get_or_init(|| SelectorProfile::from_toml_str(include_str!("../../config/selectors/metaquest.toml")).unwrap())
}

fuzz_target!(|data: &str| {
    let app = AppDescriptor {
        store: StoreId::MetaQuest,
        app_id: "4100001".into(),
        title: "Fuzz".into(),
        official_description: String::new(),
        raw_tags: Vec::new(),
        popularity_rank: 1,
    };
    let fetched = Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap();
    if let Ok(reviews) = scrape_store_reviews(data, profile(), &app, fetched) {
        for r in reviews {
            assert!(!r.body.trim().is_empty());
        }
    }
});
