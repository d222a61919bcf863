use crate::text::lexical_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    English,
    Other,
}

/// Fifty high-frequency English function words.
pub const STOPWORDS: [&str; 50] = [
    "the", "a", "an", "and", "or", "but", "if", "of", "to", "in", "on", "at", "for", "with", "by", "from",
    "as", "is", "are", "was", "were", "be", "been", "it", "this", "that", "these", "those", "i", "me", "my",
    "you", "your", "he", "she", "we", "they", "them", "not", "no", "so", "can", "do", "does", "have", "has",
    "just", "very", "all", "about",
];

const MIN_ASCII_LETTER_RATIO: f64 = 0.9;
const MIN_STOPWORD_HITS: usize = 2;

/// English iff at least 90% of letters are ASCII and at least two tokens are
/// stopwords. Text without letters is `Other`.
pub fn detect_language(body: &str) -> Language {
    let (letters, ascii) = body
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(l, a), c| (l + 1, a + usize::from(c.is_ascii_alphabetic())));
    if letters == 0 || (ascii as f64) / (letters as f64) < MIN_ASCII_LETTER_RATIO {
        return Language::Other;
    }
    let hits = lexical_tokens(body)
        .iter()
        .filter(|t| STOPWORDS.contains(&t.as_str()))
        .count();
    if hits >= MIN_STOPWORD_HITS {
        Language::English
    } else {
        Language::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_is_fifty_distinct() {
        let set: std::collections::HashSet<_> = STOPWORDS.iter().collect();
        assert_eq!(set.len(), 50);
    }

    #[test]
    fn english_sentence() {
        assert_eq!(
            detect_language("this game made me so dizzy after ten minutes of playing it"),
            Language::English
        );
    }

    #[test]
    fn cjk_only() {
        assert_eq!(detect_language("这个游戏让我头晕"), Language::Other);
    }

    #[test]
    fn no_stopwords() {
        assert_eq!(detect_language("aaaa bbbb cccc dddd"), Language::Other);
    }

    #[test]
    fn mostly_accented_text_is_other() {
        assert_eq!(detect_language("été à la café über straße"), Language::Other);
        assert_eq!(detect_language("12345 !!!"), Language::Other);
    }
}
