use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Ordered lowercase word tokens. Never contains an empty token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Wraps pre-split tokens, dropping empty strings.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        TokenSeq(tokens.into_iter().filter(|t| !t.is_empty()).collect())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl FromIterator<String> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TokenSeq::from_tokens(iter.into_iter().collect())
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}' | '\u{2011}')
}

/// Splits on whitespace and punctuation, lowercasing every token.
///
/// Apostrophes and hyphens survive only between two alphanumeric characters,
/// so `don't` and `state-of-the-art` stay whole while quotes and dashes do not.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_joiner(c)
            && !current.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphanumeric())
        {
            current.push(match c {
                '\u{2019}' => '\'',
                '\u{2010}' | '\u{2011}' => '-',
                other => other,
            });
        } else if !current.is_empty() {
            tokens.push(current.to_lowercase());
            current.clear();
        }
    }
    if !current.is_empty() {
        tokens.push(current.to_lowercase());
    }
    TokenSeq(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(seq: &TokenSeq) -> Vec<&str> {
        seq.iter().map(String::as_str).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(strs(&tokenize("The cat sat.")), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            strs(&tokenize("state-of-the-art NLP!")),
            ["state-of-the-art", "nlp"]
        );
        assert_eq!(strs(&tokenize("don't")), ["don't"]);
    }

    #[test]
    fn stray_punctuation_is_dropped() {
        assert_eq!(strs(&tokenize("'quoted' -- dash - x")), ["quoted", "dash", "x"]);
        assert_eq!(strs(&tokenize("end-")), ["end"]);
        assert_eq!(strs(&tokenize("it\u{2019}s")), ["it's"]);
        assert!(tokenize("?!... ---").is_empty());
    }

    #[test]
    fn unicode_words() {
        assert_eq!(strs(&tokenize("Größe über Ärger")), ["größe", "über", "ärger"]);
        assert_eq!(strs(&tokenize("Привет, мир")), ["привет", "мир"]);
    }

    proptest! {
        #[test]
        fn concatenation_law(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let joined = format!("{a} {b}");
            let mut expected = tokenize(&a).into_inner();
            expected.extend(tokenize(&b).into_inner());
            prop_assert_eq!(tokenize(&joined).into_inner(), expected);
        }

        #[test]
        fn no_empty_tokens(text in "\\PC{0,80}") {
            prop_assert!(tokenize(&text).iter().all(|t| !t.is_empty()));
        }
    }
}
