//! Word-level text handling shared by the scorers, the noise model and the
//! stimulus loader.

/// Splits a sentence on whitespace. Punctuation stays attached; callers that
/// need a bare word use [`strip_punctuation`] or [`normalize_word`].
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(str::to_owned).collect()
}

/// Removes leading and trailing non-alphanumeric characters, keeping
/// word-internal apostrophes and hyphens (`don't`, `well-known`).
pub fn strip_punctuation(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

/// The comparison form of a word: punctuation-stripped and case-folded.
pub fn normalize_word(word: &str) -> String {
    strip_punctuation(word).to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_terminal_period() {
        assert_eq!(strip_punctuation("antidote."), "antidote");
        assert_eq!(strip_punctuation("\"Hello,\""), "Hello");
        assert_eq!(strip_punctuation("don't"), "don't");
        assert_eq!(strip_punctuation("..."), "");
    }

    #[test]
    fn normalizes_case() {
        assert_eq!(normalize_word("Anecdote!"), "anecdote");
    }

    #[test]
    fn tokenizes_on_any_whitespace() {
        assert_eq!(tokenize("  a\tb  c\n"), vec!["a", "b", "c"]);
        assert!(tokenize("").is_empty());
    }
}
