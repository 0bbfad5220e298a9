//! Instruction embeddings, neighbour ranking and t-SNE projection.

mod external;
mod tfidf;
mod tsne;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TaskRecord;

pub use external::{parse_embedding_file, write_embedding_file, ExternalProvider};
pub use tfidf::TfIdfProvider;
pub use tsne::{place_incremental, project_tsne, TsneConfig};

/// Default neighbour count.
pub const DEFAULT_K: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("provider failed for task `{task_id}`: {reason}")]
    ProviderError { task_id: String, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("corpus has {size} embeddings, need at least {needed}")]
    CorpusTooSmall { size: usize, needed: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("t-SNE needs at least 5 points, got {0}")]
    TooFewPoints(usize),
    #[error("projection dims must be 2 or 3, got {0}")]
    InvalidDims(usize),
    #[error("gradient became non-finite at iteration {iteration}; lower the learning rate")]
    NonFiniteGradient { iteration: usize },
    #[error("embedding file: {0}")]
    File(String),
}

/// Unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values`; `None` for zero or non-finite input.
    pub fn normalized(values: Vec<f64>) -> Option<EmbeddingVector> {
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(EmbeddingVector(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Embeddings keyed by task id.
pub type Embeddings = BTreeMap<String, EmbeddingVector>;

/// Source of instruction embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Embeds every task from its full instruction text.
    fn embed(&self, tasks: &[&TaskRecord]) -> Result<Embeddings, EmbedError>;

    /// Embeds one (possibly modified) task against the corpus the provider
    /// was last fitted on, leaving all other embeddings untouched.
    fn embed_one(&self, task: &TaskRecord) -> Result<EmbeddingVector, EmbedError>;
}

/// Checks every vector has the same dimension.
pub fn check_dimensions(embeddings: &Embeddings) -> Result<usize, EmbedError> {
    let mut dims = embeddings.values().map(|v| v.dim());
    let Some(first) = dims.next() else { return Ok(0) };
    for d in dims {
        if d != first {
            return Err(EmbedError::DimensionMismatch { expected: first, found: d });
        }
    }
    Ok(first)
}

/// `(1 + cos) / 2`, in [0, 1].
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(((1.0 + dot.clamp(-1.0, 1.0)) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub task_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRanking {
    pub root_id: String,
    pub neighbors: Vec<Neighbor>,
}

/// Orders by similarity descending, then task id ascending.
pub fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.task_id.cmp(&b.task_id))
}

/// Exact top-`k` by similarity to `root_id`, root excluded.
pub fn nearest_neighbors(embeddings: &Embeddings, root_id: &str, k: usize) -> Result<NeighborRanking, EmbedError> {
    if k == 0 {
        return Err(EmbedError::InvalidK);
    }
    let root = embeddings
        .get(root_id)
        .ok_or_else(|| EmbedError::UnknownTask(root_id.to_string()))?;
    if embeddings.len() < k + 1 {
        return Err(EmbedError::CorpusTooSmall { size: embeddings.len(), needed: k + 1 });
    }
    let mut all = Vec::with_capacity(embeddings.len() - 1);
    for (id, v) in embeddings {
        if id != root_id {
            all.push(Neighbor { task_id: id.clone(), similarity: similarity(root, v)? });
        }
    }
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, rank_order);
        all.truncate(k);
    }
    all.sort_by(rank_order);
    Ok(NeighborRanking { root_id: root_id.to_string(), neighbors: all })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub task_id: String,
    pub coords: Vec<f64>,
    pub category: String,
}

#[cfg(test)]
mod tests;
