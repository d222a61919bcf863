//! Small text utilities shared by curation, indexing and grounding.

use sha2::{Digest, Sha256};

/// Collapses every whitespace run to a single space and trims both ends.
pub fn normalize_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Number of maximal non-whitespace runs.
pub fn word_count(body: &str) -> usize {
    body.split_whitespace().count()
}

/// Lowercased word tokens with leading and trailing punctuation removed.
///
/// Internal apostrophes and hyphens survive ("can't", "one-handed"), and the
/// typographic apostrophe is folded to ASCII. Tokens that are pure punctuation
/// are dropped.
pub fn lexical_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let folded: String = raw
                .chars()
                .map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c })
                .flat_map(char::to_lowercase)
                .collect();
            let trimmed = folded.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

/// Optimal string alignment distance (Levenshtein plus adjacent
/// transposition), computed over chars.
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    osa_chars(&a, &b)
}

fn osa_chars(a: &[char], b: &[char]) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    // three rolling rows: i-2, i-1, i
    let mut prev2 = vec![0usize; m + 1];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut d = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                d = d.min(prev2[j - 2] + 1);
            }
            cur[j] = d;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// True when `osa_distance(a, b) <= budget`, with a length-difference
/// shortcut so most non-matches never reach the DP.
pub fn within_distance(a: &str, b: &str, budget: usize) -> bool {
    if budget == 0 {
        return a == b;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > budget {
        return false;
    }
    osa_chars(&a, &b) <= budget
}

/// Hex SHA-256 of the given bytes.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Char-indexed substring. Offsets past the end are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let byte_at = |idx: usize| {
        text.char_indices()
            .nth(idx)
            .map_or(text.len(), |(b, _)| b)
    };
    let (s, e) = (byte_at(start), byte_at(end));
    &text[s..e.max(s)]
}
