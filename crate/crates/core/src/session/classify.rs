//! Deterministic rule-based intent routing.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::curation::{match_dimensions, DisabilityDimension, KeywordLexicon, VrCategory};
use crate::text::lexical_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    DescribeProject,
    RequestPersona,
    AskRequirements,
    RequestRelated,
    Unknown,
}

impl Intent {
    pub const ALL: [Intent; 5] = [
        Intent::DescribeProject,
        Intent::RequestPersona,
        Intent::AskRequirements,
        Intent::RequestRelated,
        Intent::Unknown,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "intent", rename_all = "snake_case")]
pub enum TurnKind {
    /// `category` is `None` when no category keyword was recognised.
    DescribeProject {
        category: Option<VrCategory>,
        description: String,
    },
    RequestPersona {
        dimension: Option<DisabilityDimension>,
    },
    AskRequirements,
    RequestRelated,
    Unknown,
}

/// One classified student message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub text: String,
    #[serde(flatten)]
    pub kind: TurnKind,
}

impl Turn {
    pub fn intent(&self) -> Intent {
        match self.kind {
            TurnKind::DescribeProject { .. } => Intent::DescribeProject,
            TurnKind::RequestPersona { .. } => Intent::RequestPersona,
            TurnKind::AskRequirements => Intent::AskRequirements,
            TurnKind::RequestRelated => Intent::RequestRelated,
            TurnKind::Unknown => Intent::Unknown,
        }
    }
}

const CATEGORY_TERMS: [(VrCategory, &[&str]); 6] = [
    (VrCategory::Action, &["action", "shooter", "fps", "combat", "fighting", "adventure", "battle", "climbing"]),
    (VrCategory::Social, &["social", "chat", "hangout", "multiplayer", "community", "meetup"]),
    (VrCategory::Horror, &["horror", "scary", "zombie", "zombies", "haunted", "creepy"]),
    (VrCategory::Puzzle, &["puzzle", "puzzles", "escape room", "riddle", "riddles", "brain teaser"]),
    (VrCategory::Simulation, &["simulation", "simulator", "sim", "flight", "driving", "cooking", "farming"]),
    (VrCategory::Sports, &["sports", "sport", "fitness", "tennis", "boxing", "golf", "soccer", "basketball", "workout"]),
];

const PROJECT_PHRASES: [&str; 16] = [
    "my project", "our project", "the project", "project is", "i am building", "i'm building",
    "we are building", "we're building", "i am making", "i'm making", "we are making", "we're making",
    "i am designing", "we are designing", "my game", "our game",
];

const PERSONA_TERMS: [&str; 2] = ["persona", "personas"];
const RELATED_PHRASES: [&str; 9] = [
    "other apps", "other app", "other games", "other applications", "similar", "related", "recommend",
    "recommendation", "recommendations",
];
const REQUIREMENT_TERMS: [&str; 2] = ["requirement", "requirements"];
const NEED_TERMS: [&str; 3] = ["need", "needs", "require"];
const QUESTION_TERMS: [&str; 4] = ["what", "which", "how", "does"];

fn find_phrase(tokens: &[String], phrase: &str) -> Option<usize> {
    let parts: Vec<&str> = phrase.split(' ').collect();
    if parts.len() > tokens.len() {
        return None;
    }
    (0..=tokens.len() - parts.len()).find(|&i| parts.iter().zip(&tokens[i..]).all(|(p, t)| p == t))
}

fn has_any(tokens: &[String], phrases: &[&str]) -> bool {
    phrases.iter().any(|p| find_phrase(tokens, p).is_some())
}

/// The category whose keyword occurs earliest; table order breaks ties.
pub fn detect_category(tokens: &[String]) -> Option<VrCategory> {
    CATEGORY_TERMS
        .iter()
        .filter_map(|(cat, terms)| terms.iter().filter_map(|t| find_phrase(tokens, t)).min().map(|pos| (pos, *cat)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, cat)| cat)
}

fn detect_dimension(text: &str, tokens: &[String], lexicon: &KeywordLexicon) -> Option<DisabilityDimension> {
    DisabilityDimension::ALL
        .iter()
        .copied()
        .find(|d| tokens.iter().any(|t| t == d.as_str()))
        .or_else(|| match_dimensions(text, lexicon).into_iter().next())
}

fn builtin_lexicon() -> &'static KeywordLexicon {
    static LEXICON: OnceLock<KeywordLexicon> = OnceLock::new();
    LEXICON.get_or_init(KeywordLexicon::builtin)
}

/// [`classify_turn_with`] using the bundled lexicon.
pub fn classify_turn(text: &str) -> Turn {
    classify_turn_with(text, builtin_lexicon())
}

/// Rules, first match wins:
/// 1. an explicit project phrase together with a category keyword describes the project;
/// 2. "other apps", "similar", "related", "recommend" ask for related personas;
/// 3. "requirement", or a need word in a question, asks for requirements;
/// 4. "persona" asks for a persona (dimension from the name or the lexicon);
/// 5. a category keyword or project phrase describes the project;
/// 6. anything else is unknown.
pub fn classify_turn_with(text: &str, lexicon: &KeywordLexicon) -> Turn {
    let tokens = lexical_tokens(text);
    let category = detect_category(&tokens);
    let project_phrase = has_any(&tokens, &PROJECT_PHRASES);
    let question = text.trim_end().ends_with('?') || has_any(&tokens, &QUESTION_TERMS);
    let describe = TurnKind::DescribeProject {
        category,
        description: text.trim().to_string(),
    };
    let kind = if project_phrase && category.is_some() {
        describe
    } else if has_any(&tokens, &RELATED_PHRASES) {
        TurnKind::RequestRelated
    } else if has_any(&tokens, &REQUIREMENT_TERMS) || (question && has_any(&tokens, &NEED_TERMS)) {
        TurnKind::AskRequirements
    } else if has_any(&tokens, &PERSONA_TERMS) {
        TurnKind::RequestPersona {
            dimension: detect_dimension(text, &tokens, lexicon),
        }
    } else if category.is_some() || project_phrase {
        describe
    } else {
        TurnKind::Unknown
    };
    Turn {
        text: text.to_string(),
        kind,
    }
}
