use std::collections::HashSet;
use std::sync::OnceLock;

use super::{Language, TokenSeq};

const ENGLISH: &str = include_str!("../../resources/stopwords/en.txt");

/// One word per line, UTF-8. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn parse(contents: &str) -> Self {
        let words = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopList { words }
    }

    /// The bundled list for `language`, if one ships with the crate.
    pub fn for_language(language: &Language) -> Option<&'static StopList> {
        static EN: OnceLock<StopList> = OnceLock::new();
        match language {
            Language::English => Some(EN.get_or_init(|| StopList::parse(ENGLISH))),
            Language::Other(_) => None,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: &TokenSeq, language: &Language) -> TokenSeq {
    match StopList::for_language(language) {
        Some(list) => tokens
            .iter()
            .filter(|t| !list.contains(t))
            .cloned()
            .collect(),
        None => tokens.clone(),
    }
}
