use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{CurationError, VrCategory};
use crate::ingest::AppDescriptor;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TagRule {
    pub tag: String,
    pub category: VrCategory,
    /// Higher wins when an app carries several mapped tags.
    #[serde(default)]
    pub priority: i32,
}

/// Tag-to-category rules plus the per-app override table recording the
/// manual primary-category decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct CategoryRules {
    #[serde(default)]
    pub rules: Vec<TagRule>,
    /// Keyed by `"{store}/{app_id}"`.
    #[serde(default)]
    pub overrides: BTreeMap<String, VrCategory>,
}

impl CategoryRules {
    pub fn from_toml_str(text: &str) -> Result<Self, CurationError> {
        let mut rules: CategoryRules =
            toml::from_str(text).map_err(|e| CurationError::InvalidCategories(e.to_string()))?;
        for r in &mut rules.rules {
            r.tag = r.tag.trim().to_lowercase();
            if r.tag.is_empty() {
                return Err(CurationError::InvalidCategories("rule with empty tag".into()));
            }
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self, CurationError> {
        Self::from_toml_str(&super::read_config(path)?)
    }
}

/// Override first, then the highest-priority rule matching any of the app's
/// tags (case-insensitive); equal priorities resolve to the earlier rule.
pub fn assign_category(app: &AppDescriptor, mapping: &CategoryRules) -> Result<VrCategory, CurationError> {
    if let Some(cat) = mapping.overrides.get(&app.key()) {
        return Ok(*cat);
    }
    let tags: Vec<String> = app.raw_tags.iter().map(|t| t.trim().to_lowercase()).collect();
    mapping
        .rules
        .iter()
        .enumerate()
        .filter(|(_, r)| tags.contains(&r.tag))
        .max_by(|(ia, a), (ib, b)| a.priority.cmp(&b.priority).then(ib.cmp(ia)))
        .map(|(_, r)| r.category)
        .ok_or_else(|| CurationError::UncategorizedApp(app.key()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::StoreId;

    fn app(tags: &[&str]) -> AppDescriptor {
        AppDescriptor {
            store: StoreId::Steam,
            app_id: "42".into(),
            title: "x".into(),
            official_description: String::new(),
            raw_tags: tags.iter().map(|s| s.to_string()).collect(),
            popularity_rank: 1,
        }
    }

    const RULES: &str = r#"
[[rules]]
tag = "horror"
category = "horror"
priority = 50

[[rules]]
tag = "Action"
category = "action"
priority = 50

[[rules]]
tag = "sports"
category = "sports"
priority = 10
"#;

    #[test]
    fn override_wins() {
        let mut rules = CategoryRules::from_toml_str(RULES).unwrap();
        rules.overrides.insert("steam/42".into(), VrCategory::Puzzle);
        assert_eq!(assign_category(&app(&["action", "multiplayer", "horror"]), &rules).unwrap(), VrCategory::Puzzle);
    }

    #[test]
    fn single_tag() {
        let rules = CategoryRules::from_toml_str(RULES).unwrap();
        assert_eq!(assign_category(&app(&["sports"]), &rules).unwrap(), VrCategory::Sports);
    }

    #[test]
    fn priority_then_rule_order() {
        let rules = CategoryRules::from_toml_str(RULES).unwrap();
        assert_eq!(assign_category(&app(&["sports", "ACTION", "horror"]), &rules).unwrap(), VrCategory::Horror);
    }

    #[test]
    fn untagged_without_override_fails() {
        let rules = CategoryRules::from_toml_str(RULES).unwrap();
        match assign_category(&app(&[]), &rules) {
            Err(CurationError::UncategorizedApp(key)) => assert_eq!(key, "steam/42"),
            other => panic!("{other:?}"),
        }
    }
}
