//! Filtering and labelling of raw reviews.
//!
//! Each raw review gets exactly one verdict. The exclusion rules run in a
//! fixed order (too short, non-English, advertisement, abusive, no disability
//! signal) and the first failing rule names the exclusion; reviews passing
//! every rule are kept with their category and disability dimensions.

mod category;
mod deny;
mod language;
mod lexicon;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use category::{assign_category, CategoryRules, TagRule};
pub use deny::{parse_patterns, DenyLists};
pub use language::{detect_language, Language, STOPWORDS};
pub use lexicon::{fuzz_budget, match_dimensions, KeywordLexicon};

use crate::ingest::{AppDescriptor, RawReview, StoreId};
use crate::text::{normalize_ws, word_count};

/// Reviews with fewer words than this are dropped.
pub const MIN_WORDS: usize = 20;

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let lowered = s.trim().to_ascii_lowercase();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == lowered)
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($name)))
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VrCategory {
    Action,
    Social,
    Horror,
    Puzzle,
    Simulation,
    Sports,
}

string_enum!(VrCategory {
    Action => "action",
    Social => "social",
    Horror => "horror",
    Puzzle => "puzzle",
    Simulation => "simulation",
    Sports => "sports",
});

/// Declaration order doubles as the tie-break order wherever dimensions are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisabilityDimension {
    Vision,
    Hearing,
    Motor,
    Cognitive,
    Vestibular,
    Speech,
}

string_enum!(DisabilityDimension {
    Vision => "vision",
    Hearing => "hearing",
    Motor => "motor",
    Cognitive => "cognitive",
    Vestibular => "vestibular",
    Speech => "speech",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    TooShort,
    NonEnglish,
    Advertisement,
    Abusive,
    NoDisabilitySignal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRef {
    pub store: StoreId,
    pub app_id: String,
    pub title: String,
}

impl From<&AppDescriptor> for AppRef {
    fn from(app: &AppDescriptor) -> Self {
        Self {
            store: app.store,
            app_id: app.app_id.clone(),
            title: app.title.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedReview {
    pub review_id: String,
    pub app: AppRef,
    /// Whitespace-normalized body.
    pub body: String,
    pub word_count: usize,
    pub category: VrCategory,
    pub dimensions: BTreeSet<DisabilityDimension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<Exclusion>,
}

impl CuratedReview {
    pub fn is_kept(&self) -> bool {
        self.exclusion.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("no category rule or override matches app {0}")]
    UncategorizedApp(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid category rules: {0}")]
    InvalidCategories(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_config(path: &Path) -> Result<String, CurationError> {
    std::fs::read_to_string(path).map_err(|source| CurationError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything the rule chain needs besides the reviews themselves.
#[derive(Debug, Clone)]
pub struct CurationRules {
    pub lexicon: KeywordLexicon,
    pub categories: CategoryRules,
    pub deny: DenyLists,
}

/// First failing rule for an already-normalized body, if any.
pub fn exclusion_for(body: &str, dimensions: &BTreeSet<DisabilityDimension>, deny: &DenyLists) -> Option<Exclusion> {
    if word_count(body) < MIN_WORDS {
        return Some(Exclusion::TooShort);
    }
    if detect_language(body) == Language::Other {
        return Some(Exclusion::NonEnglish);
    }
    let lowered = body.to_lowercase();
    if deny.is_advertisement(&lowered) {
        return Some(Exclusion::Advertisement);
    }
    if deny.is_abusive(&lowered) {
        return Some(Exclusion::Abusive);
    }
    if dimensions.is_empty() {
        return Some(Exclusion::NoDisabilitySignal);
    }
    None
}

/// Applies the rule chain to one review.
pub fn curate_one(raw: &RawReview, rules: &CurationRules) -> Result<CuratedReview, CurationError> {
    let category = assign_category(&raw.app, &rules.categories)?;
    let body = normalize_ws(&raw.body);
    let dimensions = match_dimensions(&body, &rules.lexicon);
    let exclusion = exclusion_for(&body, &dimensions, &rules.deny);
    Ok(CuratedReview {
        review_id: raw.review_id.clone(),
        app: AppRef::from(&raw.app),
        word_count: word_count(&body),
        body,
        category,
        dimensions,
        exclusion,
    })
}

/// One verdict per input review, in input order.
pub fn curate(raw: &[RawReview], rules: &CurationRules) -> Result<Vec<CuratedReview>, CurationError> {
    raw.iter().map(|r| curate_one(r, rules)).collect()
}

/// Kept-review counts per (category, dimension). A review labelled with k
/// dimensions contributes to k cells. All 36 cells are always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prevalence(BTreeMap<VrCategory, BTreeMap<DisabilityDimension, usize>>);

impl Default for Prevalence {
    fn default() -> Self {
        Self(
            VrCategory::ALL
                .iter()
                .map(|c| (*c, DisabilityDimension::ALL.iter().map(|d| (*d, 0)).collect()))
                .collect(),
        )
    }
}

impl Prevalence {
    pub fn get(&self, category: VrCategory, dimension: DisabilityDimension) -> usize {
        self.0.get(&category).and_then(|r| r.get(&dimension)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, category: VrCategory, dimension: DisabilityDimension, count: usize) {
        self.0.entry(category).or_default().insert(dimension, count);
    }

    pub fn row(&self, category: VrCategory) -> impl Iterator<Item = (DisabilityDimension, usize)> + '_ {
        DisabilityDimension::ALL.iter().map(move |d| (*d, self.get(category, *d)))
    }

    pub fn total(&self) -> usize {
        self.0.values().flat_map(|r| r.values()).sum()
    }
}

pub fn prevalence(corpus: &[CuratedReview]) -> Prevalence {
    let mut p = Prevalence::default();
    for review in corpus.iter().filter(|r| r.is_kept()) {
        for dim in &review.dimensions {
            let n = p.get(review.category, *dim);
            p.set(review.category, *dim, n + 1);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;

    fn rules() -> CurationRules {
        CurationRules {
            lexicon: KeywordLexicon::builtin(),
            categories: CategoryRules::from_toml_str("[[rules]]\ntag = \"action\"\ncategory = \"action\"\n").unwrap(),
            deny: DenyLists {
                advertisement: vec!["buy followers".into()],
                abusive: vec!["idiot".into()],
            },
        }
    }

    fn raw(body: &str) -> RawReview {
        RawReview {
            review_id: "r".into(),
            app: AppDescriptor {
                store: StoreId::Steam,
                app_id: "1".into(),
                title: "t".into(),
                official_description: String::new(),
                raw_tags: vec!["action".into()],
                popularity_rank: 1,
            },
            body: body.into(),
            rating: None,
            posted_at: DateTime::from_timestamp(0, 0).unwrap(),
            fetched_at: DateTime::from_timestamp(0, 0).unwrap(),
        }
    }

    fn words(n: usize, head: &str) -> String {
        let mut w: Vec<String> = head.split_whitespace().map(str::to_string).collect();
        let filler = ["the", "game", "is", "fun", "and", "i", "play", "it", "a", "lot"];
        let mut i = 0;
        while w.len() < n {
            w.push(filler[i % filler.len()].into());
            i += 1;
        }
        w.join(" ")
    }

    #[test]
    fn nineteen_words_too_short_even_with_signal() {
        let r = curate_one(&raw(&words(19, "motion sickness hits me")), &rules()).unwrap();
        assert_eq!(r.exclusion, Some(Exclusion::TooShort));
        let r = curate_one(&raw(&words(20, "motion sickness hits me")), &rules()).unwrap();
        assert_eq!(r.exclusion, None);
        assert_eq!(r.word_count, 20);
    }

    #[test]
    fn advertisement_deny_hit() {
        let r = curate_one(&raw(&words(25, "buy followers cheap at my site motion sickness")), &rules()).unwrap();
        assert_eq!(r.exclusion, Some(Exclusion::Advertisement));
    }

    #[test]
    fn hearing_review_kept() {
        let body = words(30, "I can't hear the dialogue, no subtitles anywhere in the menus so");
        let r = curate_one(&raw(&body), &rules()).unwrap();
        assert!(r.is_kept(), "{r:?}");
        assert!(r.dimensions.contains(&DisabilityDimension::Hearing));
    }

    #[test]
    fn body_is_whitespace_normalized() {
        let r = curate_one(&raw("  a\n\nb  "), &rules()).unwrap();
        assert_eq!(r.body, "a b");
    }

    #[test]
    fn uncategorized_propagates() {
        let mut input = raw("x");
        input.app.raw_tags.clear();
        assert!(matches!(curate(&[input], &rules()), Err(CurationError::UncategorizedApp(_))));
    }

    fn kept(category: VrCategory, dims: &[DisabilityDimension]) -> CuratedReview {
        CuratedReview {
            review_id: "x".into(),
            app: AppRef {
                store: StoreId::Steam,
                app_id: "1".into(),
                title: "t".into(),
            },
            body: String::new(),
            word_count: 20,
            category,
            dimensions: dims.iter().copied().collect(),
            exclusion: None,
        }
    }

    #[test]
    fn prevalence_counts() {
        use DisabilityDimension::*;
        assert_eq!(prevalence(&[]).total(), 0);
        assert_eq!(prevalence(&[]), Prevalence::default());

        let mut corpus = vec![kept(VrCategory::Action, &[Vestibular]); 3];
        corpus.push(kept(VrCategory::Action, &[Hearing]));
        corpus.push(kept(VrCategory::Puzzle, &[Vision, Motor]));
        let mut excluded = kept(VrCategory::Action, &[Vestibular]);
        excluded.exclusion = Some(Exclusion::Abusive);
        corpus.push(excluded);

        let p = prevalence(&corpus);
        assert_eq!(p.get(VrCategory::Action, Vestibular), 3);
        assert_eq!(p.get(VrCategory::Action, Hearing), 1);
        assert_eq!(p.get(VrCategory::Puzzle, Vision), 1);
        assert_eq!(p.get(VrCategory::Puzzle, Motor), 1);
        assert_eq!(p.total(), 6);
    }

    #[test]
    fn prevalence_json_shape() {
        let json = serde_json::to_value(Prevalence::default()).unwrap();
        assert_eq!(json["action"]["vestibular"], 0);
        assert_eq!(json.as_object().unwrap().len(), 6);
    }
}
