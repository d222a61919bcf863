//! Disability keyword lexicon and the fuzzy phrase matcher.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::{CurationError, DisabilityDimension};
use crate::text::{lexical_tokens, within_distance};

/// Allowed edit distance for a phrase token of the given length:
/// exact up to 4 letters, 1 edit for 5 to 8, 2 edits from 9.
pub fn fuzz_budget(token: &str) -> usize {
    match token.chars().count() {
        0..=4 => 0,
        5..=8 => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordLexicon {
    entries: BTreeMap<DisabilityDimension, Vec<Vec<String>>>,
}

#[derive(Deserialize)]
struct LexiconFile {
    dimensions: HashMap<DisabilityDimension, Vec<String>>,
}

impl KeywordLexicon {
    /// Builds a lexicon and checks its invariants: every dimension has at
    /// least one phrase, phrases are lowercase with 1 to 4 tokens, and no
    /// phrase is listed under two dimensions.
    pub fn new(entries: impl IntoIterator<Item = (DisabilityDimension, Vec<String>)>) -> Result<Self, CurationError> {
        let mut out: BTreeMap<DisabilityDimension, Vec<Vec<String>>> = BTreeMap::new();
        let mut owner: HashMap<String, DisabilityDimension> = HashMap::new();
        for (dim, phrases) in entries {
            for phrase in phrases {
                if phrase != phrase.to_lowercase() {
                    return Err(CurationError::InvalidLexicon(format!("phrase {phrase:?} is not lowercase")));
                }
                let tokens: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
                if tokens.is_empty() || tokens.len() > 4 {
                    return Err(CurationError::InvalidLexicon(format!(
                        "phrase {phrase:?} must have 1 to 4 tokens"
                    )));
                }
                let canonical = tokens.join(" ");
                match owner.get(&canonical) {
                    Some(prev) if *prev != dim => {
                        return Err(CurationError::InvalidLexicon(format!(
                            "phrase {canonical:?} listed under both {prev} and {dim}"
                        )))
                    }
                    Some(_) => continue,
                    None => {
                        owner.insert(canonical, dim);
                    }
                }
                out.entry(dim).or_default().push(tokens);
            }
        }
        if let Some(missing) = DisabilityDimension::ALL.iter().find(|d| !out.contains_key(d)) {
            return Err(CurationError::InvalidLexicon(format!("dimension {missing} has no phrases")));
        }
        Ok(Self { entries: out })
    }

    /// TOML form: a `[dimensions]` table mapping each dimension to a list of phrases.
    pub fn from_toml_str(text: &str) -> Result<Self, CurationError> {
        let file: LexiconFile = toml::from_str(text).map_err(|e| CurationError::InvalidLexicon(e.to_string()))?;
        let mut entries: Vec<_> = file.dimensions.into_iter().collect();
        entries.sort_by_key(|(d, _)| *d);
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, CurationError> {
        Self::from_toml_str(&super::read_config(path)?)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(include_str!("../../../../config/lexicon.toml")).expect("bundled lexicon is valid")
    }

    pub fn phrases(&self, dim: DisabilityDimension) -> &[Vec<String>] {
        self.entries.get(&dim).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DisabilityDimension, &[String])> {
        self.entries
            .iter()
            .flat_map(|(d, ps)| ps.iter().map(move |p| (*d, p.as_slice())))
    }
}

fn phrase_matches_at(phrase: &[String], window: &[String]) -> bool {
    phrase
        .iter()
        .zip(window)
        .all(|(p, t)| within_distance(p, t, fuzz_budget(p)))
}

/// Dimensions whose phrases fuzzily match some equal-length token window of the body.
pub fn match_dimensions(body: &str, lexicon: &KeywordLexicon) -> BTreeSet<DisabilityDimension> {
    let tokens = lexical_tokens(body);
    let mut found = BTreeSet::new();
    for (dim, phrases) in &lexicon.entries {
        let hit = phrases.iter().any(|phrase| {
            tokens.len() >= phrase.len() && tokens.windows(phrase.len()).any(|w| phrase_matches_at(phrase, w))
        });
        if hit {
            found.insert(*dim);
        }
    }
    found
}
