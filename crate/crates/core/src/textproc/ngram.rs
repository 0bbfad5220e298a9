use std::collections::BTreeMap;

use super::TextError;

pub type NGram = Vec<String>;

/// Contiguous n-token windows with their multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NGramBag {
    n: usize,
    counts: BTreeMap<NGram, usize>,
}

impl NGramBag {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &BTreeMap<NGram, usize> {
        &self.counts
    }

    pub fn get(&self, gram: &[&str]) -> usize {
        let key: NGram = gram.iter().map(|s| s.to_string()).collect();
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Highest multiplicity of any single n-gram; 0 for an empty bag.
    pub fn max_frequency(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Most frequent n-grams, ties ordered by the n-gram itself.
    pub fn top(&self, limit: usize) -> Vec<(NGram, usize)> {
        let mut items: Vec<(NGram, usize)> =
            self.counts.iter().map(|(g, c)| (g.clone(), *c)).collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(limit);
        items
    }
}

pub fn ngrams(tokens: &[String], n: usize) -> Result<NGramBag, TextError> {
    if n == 0 {
        return Err(TextError::InvalidN(n));
    }
    let mut counts = BTreeMap::new();
    for window in tokens.windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    Ok(NGramBag { n, counts })
}
