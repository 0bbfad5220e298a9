//! Deterministic text preprocessing: tokenization, stop-word removal,
//! stemming-based lemmatization, POS tagging and n-gram extraction.
//!
//! English gets the full pipeline. Any other language degrades gracefully:
//! identity lemmas, every token tagged [`PosClass::Other`], and no stop-word
//! removal.

mod ngram;
mod porter;
mod stopwords;
mod tagger;
mod tokenize;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ngram::{ngrams, NGram, NGramBag};
pub use porter::porter_stem;
pub use stopwords::{remove_stopwords, StopList};
pub use tagger::{AveragedPerceptron, PosTagger, TrainingSentence};
pub use tokenize::{tokenize, TokenSeq};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("n-gram size must be at least 1, got {0}")]
    InvalidN(usize),
    #[error("failed to load tagger model {path}: {reason}")]
    ModelLoadError { path: String, reason: String },
}

/// Processing language. Only English has bundled resources.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Language {
    #[default]
    English,
    Other(String),
}

impl Language {
    /// Accepts ISO-639-1/3 codes or English names, case-insensitively.
    pub fn from_code(code: &str) -> Language {
        match code.trim().to_ascii_lowercase().as_str() {
            "en" | "eng" | "english" => Language::English,
            other => Language::Other(other.to_string()),
        }
    }

    pub fn code(&self) -> &str {
        match self {
            Language::English => "en",
            Language::Other(code) => code,
        }
    }

    pub fn is_supported(&self) -> bool {
        matches!(self, Language::English)
    }
}


impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Collapsed part-of-speech class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosClass {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl PosClass {
    pub const ALL: [PosClass; 5] = [
        PosClass::Noun,
        PosClass::Verb,
        PosClass::Adj,
        PosClass::Adv,
        PosClass::Other,
    ];

    /// Maps a fine-grained tag (universal or Penn Treebank) onto the five
    /// collapsed classes.
    pub fn from_tag(tag: &str) -> PosClass {
        match tag {
            "NOUN" | "PROPN" => PosClass::Noun,
            "VERB" | "AUX" => PosClass::Verb,
            "ADJ" => PosClass::Adj,
            "ADV" => PosClass::Adv,
            t if t.starts_with("NN") => PosClass::Noun,
            t if t.starts_with("VB") || t == "MD" => PosClass::Verb,
            t if t.starts_with("JJ") => PosClass::Adj,
            t if t.starts_with("RB") || t == "WRB" => PosClass::Adv,
            _ => PosClass::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PosClass::Noun => "noun",
            PosClass::Verb => "verb",
            PosClass::Adj => "adj",
            PosClass::Adv => "adv",
            PosClass::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<PosClass> {
        match s.to_ascii_lowercase().as_str() {
            "noun" | "nouns" => Some(PosClass::Noun),
            "verb" | "verbs" => Some(PosClass::Verb),
            "adj" | "adjective" | "adjectives" => Some(PosClass::Adj),
            "adv" | "adverb" | "adverbs" => Some(PosClass::Adv),
            "other" => Some(PosClass::Other),
            _ => None,
        }
    }
}

impl fmt::Display for PosClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub lemma: String,
    pub pos_class: PosClass,
}

/// Lemma used throughout the metrics. English tokens are stemmed to the
/// stemmer's fixed point so the function is idempotent.
pub fn lemmatize(token: &str, language: &Language) -> String {
    if !language.is_supported() {
        return token.to_string();
    }
    let mut current = token.to_string();
    loop {
        let next = porter_stem(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Tags tokens with the bundled English model. Unsupported languages tag
/// everything [`PosClass::Other`].
pub fn pos_tag(tokens: &TokenSeq, language: &Language) -> Result<Vec<TaggedToken>, TextError> {
    if !language.is_supported() {
        return Ok(tokens
            .iter()
            .map(|t| TaggedToken {
                surface: t.clone(),
                lemma: t.clone(),
                pos_class: PosClass::Other,
            })
            .collect());
    }
    let tagger = PosTagger::bundled()?;
    Ok(tagger.tag_tokens(tokens.as_slice(), language))
}

/// Language-bound view over the preprocessing resources. Every metric goes
/// through one of these so that items are derived the same way everywhere.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    language: Language,
}

impl Analyzer {
    pub fn new(language: Language) -> Self {
        Analyzer { language }
    }

    pub fn english() -> Self {
        Analyzer::new(Language::English)
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn tokens(&self, text: &str) -> TokenSeq {
        tokenize(text)
    }

    /// Lemmas of the non-stop-word tokens, in token order.
    pub fn content_lemmas(&self, text: &str) -> Vec<String> {
        let tokens = remove_stopwords(&tokenize(text), &self.language);
        tokens
            .iter()
            .map(|t| lemmatize(t, &self.language))
            .collect()
    }

    pub fn lemma_set(&self, text: &str) -> BTreeSet<String> {
        self.content_lemmas(text).into_iter().collect()
    }

    pub fn tagged(&self, text: &str) -> Result<Vec<TaggedToken>, TextError> {
        pos_tag(&tokenize(text), &self.language)
    }

    /// Distinct lemmas of non-stop-word tokens tagged with `class`.
    pub fn pos_lemma_set(&self, text: &str, class: PosClass) -> Result<BTreeSet<String>, TextError> {
        let stop = StopList::for_language(&self.language);
        Ok(self
            .tagged(text)?
            .into_iter()
            .filter(|t| t.pos_class == class)
            .filter(|t| !stop.map(|s| s.contains(&t.surface)).unwrap_or(false))
            .map(|t| t.lemma)
            .collect())
    }

    pub fn pos_count(&self, text: &str, class: PosClass) -> Result<usize, TextError> {
        Ok(self
            .tagged(text)?
            .iter()
            .filter(|t| t.pos_class == class)
            .count())
    }
}
