//! Text utilities for biography handling: phrase matching, redaction,
//! sentence splitting and a deterministic hashing embedder.

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};

/// Replacement written over every masked span.
pub const REDACTION_TOKEN: &str = "[REDACTED]";

/// Case-insensitive, leftmost-longest literal phrase matcher.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    patterns: Vec<String>,
    automaton: Option<AhoCorasick>,
}

impl PhraseMatcher {
    pub fn new<I, S>(patterns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let patterns: Vec<String> = patterns
            .into_iter()
            .map(|p| p.as_ref().trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        let automaton = if patterns.is_empty() {
            None
        } else {
            Some(
                AhoCorasickBuilder::new()
                    .ascii_case_insensitive(true)
                    .match_kind(MatchKind::LeftmostLongest)
                    .build(&patterns)
                    .expect("literal patterns always compile"),
            )
        };
        Self {
            patterns,
            automaton,
        }
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Non-overlapping matches as `(start, end, pattern index)`.
    pub fn find_all(&self, text: &str) -> Vec<(usize, usize, usize)> {
        match &self.automaton {
            None => Vec::new(),
            Some(ac) => ac
                .find_iter(text)
                .map(|m| (m.start(), m.end(), m.pattern().as_usize()))
                .collect(),
        }
    }

    pub fn first_match<'a>(&'a self, text: &str) -> Option<&'a str> {
        self.find_all(text)
            .first()
            .map(|&(_, _, p)| self.patterns[p].as_str())
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.automaton.as_ref().is_some_and(|ac| ac.is_match(text))
    }

    /// Every distinct pattern occurring in `text`, lower-cased.
    pub fn distinct_matches(&self, text: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .find_all(text)
            .into_iter()
            .map(|(_, _, p)| self.patterns[p].to_ascii_lowercase())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Replaces every match with [`REDACTION_TOKEN`]; bytes outside matches are
/// copied unchanged.
pub fn redact(text: &str, matcher: &PhraseMatcher) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, end, _) in matcher.find_all(text) {
        out.push_str(&text[last..start]);
        out.push_str(REDACTION_TOKEN);
        last = end;
    }
    out.push_str(&text[last..]);
    out
}

/// Splits on sentence-final punctuation followed by whitespace.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        let end_mark = matches!(bytes[i], b'.' | b'!' | b'?');
        let followed_by_space = bytes.get(i + 1).is_none_or(|b| b.is_ascii_whitespace());
        if end_mark && followed_by_space {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Maps text to a dense vector; implementations must be deterministic.
pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Signed feature hashing of lower-cased word tokens, l2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 384 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "the", "of", "in", "on", "at", "to", "for", "with", "by", "his", "her", "he",
    "she", "was", "were", "is", "as", "from", "that", "this", "their", "its", "it",
];

pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
}

impl TextEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f64; self.dim];
        for tok in tokens(text) {
            let h = fnv1a(tok.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            v[slot] += sign;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v.into_iter().map(|x| x as f32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask() -> PhraseMatcher {
        PhraseMatcher::new(["influenced by", "was influenced by", "inspired by", "admired"])
    }

    #[test]
    fn redacts_direct_hit() {
        assert_eq!(
            redact("Monet was influenced by Turner.", &mask()),
            "Monet [REDACTED] Turner."
        );
    }

    #[test]
    fn identity_without_patterns() {
        let t = "Born in Delft, trained in Haarlem.";
        assert_eq!(redact(t, &mask()), t);
    }

    #[test]
    fn overlapping_patterns_take_leftmost_longest() {
        // "was influenced by" and "influenced by" overlap; the leftmost start wins,
        // and among equal starts the longest.
        let m = PhraseMatcher::new(["influenced by", "was influenced", "was influenced by Y"]);
        assert_eq!(redact("X was influenced by Y and Z", &m), "X [REDACTED] and Z");
        let m = PhraseMatcher::new(["ab", "bcd"]);
        assert_eq!(redact("abcd", &m), "[REDACTED]cd");
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(redact("He ADMIRED her.", &mask()), "He [REDACTED] her.");
    }

    #[test]
    fn sentence_split() {
        assert_eq!(
            sentences("One. Two! Three? Four"),
            vec!["One.", "Two!", "Three?", "Four"]
        );
        assert_eq!(sentences("St.Ives stays."), vec!["St.Ives stays."]);
    }

    #[test]
    fn embedder_is_deterministic_and_unit() {
        let e = HashingEmbedder::default();
        let a = e.embed("Japanese prints in Paris");
        assert_eq!(a, e.embed("Japanese prints in Paris"));
        let n: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-5);
        assert!(e.embed("").iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn redaction_is_idempotent_and_complete(words in proptest::collection::vec(
            prop_oneof!["influenced by", "admired", "Paris", "and", "inspired", "by", "was", "X"], 0..20)) {
            let text = words.join(" ");
            let m = mask();
            let once = redact(&text, &m);
            prop_assert_eq!(redact(&once, &m), once.clone());
            prop_assert!(!m.is_match(&once));
        }
    }
}
