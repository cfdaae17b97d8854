//! Small text normalization helpers shared across subsystems.

/// Lowercases and splits on non-alphanumeric characters, dropping empties.
///
/// This is the single tokenization rule used for sparse retrieval scoring
/// and for the lexical features of the offline embedder.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lowercases and collapses whitespace runs to single spaces, trimming ends.
pub fn normalize_ws_lower(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Strips non-alphanumeric characters from both ends of a string.
pub fn trim_punctuation(text: &str) -> &str {
    text.trim_matches(|c: char| !c.is_alphanumeric() && !c.is_whitespace())
        .trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(
            tokenize("The cat, the hat!"),
            vec!["the", "cat", "the", "hat"]
        );
    }

    #[test]
    fn tokenize_drops_empty_segments() {
        assert_eq!(tokenize("  --  a  --  "), vec!["a"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("?!").is_empty());
    }

    #[test]
    fn tokenize_keeps_digits() {
        assert_eq!(tokenize("BM25 scores"), vec!["bm25", "scores"]);
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize_ws_lower("  PARIS,\n  France  "), "paris, france");
    }

    #[test]
    fn trim_punctuation_strips_surrounding_marks() {
        assert_eq!(trim_punctuation("\"paris, france.\""), "paris, france");
        assert_eq!(trim_punctuation("...abc..."), "abc");
        assert_eq!(trim_punctuation("abc"), "abc");
    }
}
