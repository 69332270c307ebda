use std::collections::BTreeSet;
use std::sync::LazyLock;

use super::porter::stem;

/// Built-in English stop words, used when the topic config does not supply
/// its own list.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "just", "me", "more", "most", "my", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
    "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "you", "your", "yours",
];

static DEFAULT_SET: LazyLock<BTreeSet<&'static str>> =
    LazyLock::new(|| DEFAULT_STOP_WORDS.iter().copied().collect());

/// Lowercase, tokenize, drop stop words, and stem. Token order and
/// duplicates are preserved. Tokens containing anything but ASCII letters
/// (digits, non-Latin scripts) skip the stemmer and pass through as-is.
pub fn preprocess_text(text: &str) -> Vec<String> {
    preprocess_with(text, |token| DEFAULT_SET.contains(token))
}

pub fn preprocess_text_with(text: &str, stop_words: &BTreeSet<String>) -> Vec<String> {
    preprocess_with(text, |token| stop_words.contains(token))
}

fn preprocess_with(text: &str, is_stop_word: impl Fn(&str) -> bool) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stop_word(t))
        .map(|t| {
            if t.bytes().all(|b| b.is_ascii_lowercase()) {
                stem(t)
            } else {
                t.to_string()
            }
        })
        .collect()
}
