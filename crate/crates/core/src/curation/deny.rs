use std::path::Path;

use super::CurationError;

/// Lowercase substring patterns for advertisement and abusive content.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DenyLists {
    pub advertisement: Vec<String>,
    pub abusive: Vec<String>,
}

/// One pattern per line; blank lines and `#` comments are ignored.
pub fn parse_patterns(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| crate::text::normalize_ws(&l.to_lowercase()))
        .collect()
}

impl DenyLists {
    /// Reads `advertisement.txt` and `abusive.txt` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, CurationError> {
        Ok(Self {
            advertisement: parse_patterns(&super::read_config(&dir.join("advertisement.txt"))?),
            abusive: parse_patterns(&super::read_config(&dir.join("abusive.txt"))?),
        })
    }

    pub fn is_advertisement(&self, lowered_body: &str) -> bool {
        self.advertisement.iter().any(|p| lowered_body.contains(p.as_str()))
    }

    pub fn is_abusive(&self, lowered_body: &str) -> bool {
        self.abusive.iter().any(|p| lowered_body.contains(p.as_str()))
    }
}
