//! Tokenization, stop words, lemmatization and token-level text edits.
//!
//! Token grammar: a token is a maximal run of Unicode alphanumeric
//! characters, lowercased. Everything else (whitespace, punctuation,
//! apostrophes, symbols) separates tokens and is dropped, so `"Let's"`
//! yields `let` and `s`.

use std::collections::HashSet;
use std::sync::OnceLock;

static STOPWORDS_RAW: &str = include_str!("../data/stopwords_en.txt");

/// Version tag of the bundled stop-word list.
pub const STOPWORDS_VERSION: u32 = 1;

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Byte range `[start, end)` into the original text.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenList {
    pub tokens: Vec<String>,
    /// `true` for content (non-stop-word) tokens.
    pub content_mask: Vec<bool>,
    pub spans: Vec<Span>,
}

impl TokenList {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn content_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .zip(&self.content_mask)
            .filter(|(_, &c)| c)
            .map(|(t, _)| t.as_str())
    }

    /// Distinct content tokens in order of first appearance.
    pub fn distinct_content(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.content_tokens().filter(|t| seen.insert(*t)).collect()
    }

    pub fn spans_of(&self, token: &str) -> Vec<Span> {
        self.tokens
            .iter()
            .zip(&self.spans)
            .filter(|(t, _)| t.as_str() == token)
            .map(|(_, s)| *s)
            .collect()
    }
}

pub fn tokenize(text: &str) -> TokenList {
    let mut out = TokenList::default();
    let mut start: Option<usize> = None;
    let push = |out: &mut TokenList, s: usize, e: usize| {
        let tok: String = text[s..e].chars().flat_map(char::to_lowercase).collect();
        out.content_mask.push(!is_stopword(&tok));
        out.tokens.push(tok);
        out.spans.push((s, e));
    };
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            push(&mut out, s, i);
        }
    }
    if let Some(s) = start {
        push(&mut out, s, text.len());
    }
    out
}

/// Remove every occurrence of `token` from `text`, leaving the surrounding
/// characters in place. Neighbouring tokens stay separated because tokens
/// are maximal alphanumeric runs.
pub fn remove_token(text: &str, token: &str) -> String {
    remove_occurrences(text, token, usize::MAX)
}

/// Remove up to `count` occurrences of `token`, starting from the end.
pub fn remove_occurrences(text: &str, token: &str, count: usize) -> String {
    let tl = tokenize(text);
    let mut spans = tl.spans_of(token);
    let keep = spans.len().saturating_sub(count);
    let drop: Vec<Span> = spans.drain(keep..).collect();
    splice(text, &drop, "")
}

/// Replace every occurrence of `token` with `replacement`.
pub fn replace_token(text: &str, token: &str, replacement: &str) -> String {
    let spans = tokenize(text).spans_of(token);
    splice(text, &spans, replacement)
}

/// Append `token` `count` times, space separated.
pub fn append_token(text: &str, token: &str, count: usize) -> String {
    let mut out = text.trim_end().to_string();
    for _ in 0..count {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

fn splice(text: &str, spans: &[Span], replacement: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for &(s, e) in spans {
        out.push_str(&text[cursor..s]);
        out.push_str(replacement);
        cursor = e;
    }
    out.push_str(&text[cursor..]);
    out
}

const LEMMA_EXCEPTIONS: &[(&str, &str)] = &[
    ("ran", "run"),
    ("running", "run"),
    ("runs", "run"),
    ("went", "go"),
    ("goes", "go"),
    ("gone", "go"),
    ("going", "go"),
    ("children", "child"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "person"),
    ("mice", "mouse"),
    ("swam", "swim"),
    ("swum", "swim"),
    ("rode", "ride"),
    ("ridden", "ride"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("felt", "feel"),
    ("slept", "sleep"),
    ("better", "good"),
    ("best", "good"),
    ("healthier", "healthy"),
    ("fitter", "fit"),
    ("lives", "life"),
    ("knees", "knee"),
    ("bodies", "body"),
    ("stairs", "stair"),
    ("calories", "calorie"),
    ("was", "be"),
    ("were", "be"),
    ("is", "be"),
    ("are", "be"),
    ("has", "have"),
    ("had", "have"),
    ("does", "do"),
    ("did", "do"),
    ("makes", "make"),
    ("made", "make"),
    ("taking", "take"),
    ("took", "take"),
    ("gave", "give"),
    ("given", "give"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

/// Reduce a lowercase token to a root form with a small exception table and
/// suffix-stripping rules. Non-ASCII tokens are returned unchanged.
pub fn lemmatize(token: &str) -> String {
    if let Some((_, lemma)) = LEMMA_EXCEPTIONS.iter().find(|(w, _)| *w == token) {
        return (*lemma).to_string();
    }
    if !token.is_ascii() || token.len() <= 3 {
        return token.to_string();
    }
    let n = token.len();
    if let Some(stem) = token.strip_suffix("ies") {
        if n > 4 {
            return format!("{stem}y");
        }
    }
    if token.ends_with("sses") || token.ends_with("ches") || token.ends_with("shes") || token.ends_with("xes") {
        return token[..n - 2].to_string();
    }
    if let Some(stem) = token.strip_suffix("ing") {
        if stem.len() >= 3 && stem.bytes().any(is_vowel) {
            return undouble(stem);
        }
    }
    if let Some(stem) = token.strip_suffix("ied") {
        return format!("{stem}y");
    }
    if let Some(stem) = token.strip_suffix("ed") {
        if stem.len() >= 3 && stem.bytes().any(is_vowel) {
            return undouble(stem);
        }
    }
    if token.ends_with('s')
        && !token.ends_with("ss")
        && !token.ends_with("us")
        && !token.ends_with("is")
    {
        return token[..n - 1].to_string();
    }
    token.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_contraction_and_flags_stop_words() {
        let tl = tokenize("Let's go for some exercise.");
        assert_eq!(tl.tokens, ["let", "s", "go", "for", "some", "exercise"]);
        let content: Vec<_> = tl.content_tokens().collect();
        assert_eq!(content, ["go", "exercise"]);
        assert_eq!(tl.content_mask.len(), tl.tokens.len());
    }

    #[test]
    fn blank_text_is_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... !").is_empty());
    }

    #[test]
    fn case_folding_and_punctuation() {
        let tl = tokenize("Exercise exercise!");
        assert_eq!(tl.tokens, ["exercise", "exercise"]);
        assert_eq!(tl.spans, [(0, 8), (9, 17)]);
    }

    #[test]
    fn spans_point_into_original_text() {
        let text = "Walk, don’t RUN";
        let tl = tokenize(text);
        for (tok, (s, e)) in tl.tokens.iter().zip(&tl.spans) {
            assert_eq!(text[*s..*e].to_lowercase(), *tok);
        }
        assert_eq!(tl.tokens, ["walk", "don", "t", "run"]);
    }

    #[test]
    fn removal_keeps_neighbours_apart() {
        assert_eq!(remove_token("a-b-c", "b"), "a--c");
        assert_eq!(tokenize(&remove_token("go run, go walk", "go")).tokens, ["run", "walk"]);
        assert_eq!(remove_occurrences("go run go", "go", 1), "go run ");
    }

    #[test]
    fn replace_and_append() {
        assert_eq!(replace_token("Take time, time flies", "time", "musical time"), "Take musical time, musical time flies");
        assert_eq!(append_token("walk daily.", "exercise", 2), "walk daily. exercise exercise");
        assert_eq!(append_token("", "walk", 1), "walk");
    }

    #[test]
    fn lemmatizer_rules() {
        for (w, l) in [
            ("walking", "walk"),
            ("running", "run"),
            ("jogging", "jog"),
            ("stretches", "stretch"),
            ("calories", "calorie"),
            ("activities", "activity"),
            ("muscles", "muscle"),
            ("stopped", "stop"),
            ("exercise", "exercise"),
            ("fitness", "fitness"),
            ("went", "go"),
            ("bus", "bus"),
            ("day", "day"),
        ] {
            assert_eq!(lemmatize(w), l, "{w}");
        }
    }

    #[test]
    fn stop_list_contents() {
        assert!(is_stopword("the") && is_stopword("to") && is_stopword("let"));
        assert!(!is_stopword("exercise") && !is_stopword("go") && !is_stopword("time"));
    }
}
