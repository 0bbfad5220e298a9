//! Deterministic TF-IDF embeddings with a seeded random projection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Mutex, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, Embeddings};
use crate::biasmetrics::{component_text, ComponentSelector};
use crate::corpus::TaskRecord;
use crate::textproc::Analyzer;

/// Output dimension of the default provider.
pub const DEFAULT_DIM: usize = 256;

/// Stand-in term for instructions with no content lemmas.
const EMPTY_TERM: &str = "\u{0}empty";

#[derive(Debug, Default)]
struct Fitted {
    documents: usize,
    df: BTreeMap<String, usize>,
}

/// Lemma TF-IDF with smoothed IDF `ln((1+N)/(1+df)) + 1`, projected onto
/// `dim` dimensions. Each term's projection row is a Gaussian vector seeded
/// by hashing the term with the provider seed, so a task's vector depends on
/// the corpus only through document frequencies.
#[derive(Debug)]
pub struct TfIdfProvider {
    dim: usize,
    seed: u64,
    fitted: RwLock<Fitted>,
    rows: Mutex<HashMap<String, Vec<f64>>>,
}

impl TfIdfProvider {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(DEFAULT_DIM, seed)
    }

    pub fn with_dim(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        TfIdfProvider {
            dim,
            seed,
            fitted: RwLock::new(Fitted::default()),
            rows: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn term_counts(task: &TaskRecord) -> Result<BTreeMap<String, usize>, EmbedError> {
        let text = component_text(task, &ComponentSelector::FullInstruction).map_err(|e| EmbedError::ProviderError {
            task_id: task.task_id.clone(),
            reason: e.to_string(),
        })?;
        let mut counts = BTreeMap::new();
        for lemma in Analyzer::new(task.language()).content_lemmas(&text) {
            *counts.entry(lemma).or_insert(0) += 1;
        }
        if counts.is_empty() {
            counts.insert(EMPTY_TERM.to_string(), 1);
        }
        Ok(counts)
    }

    fn projection_row(&self, term: &str) -> Vec<f64> {
        let mut rows = self.rows.lock().expect("projection cache poisoned");
        rows.entry(term.to_string())
            .or_insert_with(|| {
                let mut hasher = Sha256::new();
                hasher.update(self.seed.to_le_bytes());
                hasher.update(term.as_bytes());
                let seed: [u8; 32] = hasher.finalize().into();
                let mut rng = ChaCha8Rng::from_seed(seed);
                (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .clone()
    }

    fn vectorize(&self, task_id: &str, counts: &BTreeMap<String, usize>, fitted: &Fitted) -> Result<EmbeddingVector, EmbedError> {
        let n = fitted.documents as f64;
        let mut acc = vec![0.0; self.dim];
        for (term, tf) in counts {
            let df = fitted.df.get(term).copied().unwrap_or(0) as f64;
            let weight = *tf as f64 * (((1.0 + n) / (1.0 + df)).ln() + 1.0);
            for (a, r) in acc.iter_mut().zip(self.projection_row(term)) {
                *a += weight * r;
            }
        }
        EmbeddingVector::normalized(acc).ok_or_else(|| EmbedError::ProviderError {
            task_id: task_id.to_string(),
            reason: "projection collapsed to the zero vector".to_string(),
        })
    }
}

impl EmbeddingProvider for TfIdfProvider {
    fn name(&self) -> &str {
        "tfidf"
    }

    fn embed(&self, tasks: &[&TaskRecord]) -> Result<Embeddings, EmbedError> {
        let mut docs = BTreeMap::new();
        for task in tasks {
            docs.insert(task.task_id.clone(), Self::term_counts(task)?);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for counts in docs.values() {
            for term in counts.keys().collect::<BTreeSet<_>>() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let fitted = Fitted { documents: docs.len(), df };
        let out = docs
            .iter()
            .map(|(id, counts)| Ok((id.clone(), self.vectorize(id, counts, &fitted)?)))
            .collect::<Result<Embeddings, EmbedError>>()?;
        *self.fitted.write().expect("fitted model poisoned") = fitted;
        Ok(out)
    }

    fn embed_one(&self, task: &TaskRecord) -> Result<EmbeddingVector, EmbedError> {
        let counts = Self::term_counts(task)?;
        let fitted = self.fitted.read().expect("fitted model poisoned");
        self.vectorize(&task.task_id, &counts, &fitted)
    }
}
