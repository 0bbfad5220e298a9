//! Correlation graph and chord matrices over a root and its neighbours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasmetrics::{component_text, overlap_sets, sample_length, ComponentSelector, MetricError};
use crate::corpus::TaskRecord;
use crate::embedspace::{similarity, EmbedError, Embeddings, NeighborRanking};
use crate::textproc::Analyzer;

/// Default link and ribbon threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("chord component must be instruction-side, got {0}")]
    InvalidComponent(ComponentSelector),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("no embedding for task `{0}`")]
    MissingEmbedding(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    pub task_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChordRelation {
    NormWordOverlap,
    NormLengthRatio,
}

impl ChordRelation {
    pub fn parse(s: &str) -> Option<ChordRelation> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "overlap" | "word_overlap" | "norm_word_overlap" => Some(ChordRelation::NormWordOverlap),
            "length" | "length_ratio" | "norm_length_ratio" => Some(ChordRelation::NormLengthRatio),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordMatrix {
    pub relation: ChordRelation,
    pub component: ComponentSelector,
    pub task_ids: Vec<String>,
    /// Row-major, `task_ids.len()` squared.
    pub values: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl ChordMatrix {
    /// Index pairs `(i, j)`, `i < j`, drawn as ribbons.
    pub fn ribbons(&self) -> Vec<(usize, usize)> {
        let n = self.values.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.values[i][j] >= self.threshold)
            .collect()
    }
}

fn check_threshold(t: f64) -> Result<(), RelationError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(RelationError::InvalidThreshold(t))
    }
}

/// Task ids in display order: root first, then neighbours by rank.
pub fn selection(ranking: &NeighborRanking) -> Vec<String> {
    std::iter::once(ranking.root_id.clone())
        .chain(ranking.neighbors.iter().map(|n| n.task_id.clone()))
        .collect()
}

/// Node-link graph over the root and its neighbours with an edge for every
/// pair whose similarity reaches `threshold`.
pub fn build_graph(ranking: &NeighborRanking, embeddings: &Embeddings, threshold: f64) -> Result<CorrelationGraph, RelationError> {
    check_threshold(threshold)?;
    let ids = selection(ranking);
    let vectors = ids
        .iter()
        .map(|id| embeddings.get(id).ok_or_else(|| RelationError::MissingEmbedding(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let nodes = ids
        .iter()
        .enumerate()
        .map(|(i, id)| GraphNode {
            label: format!("T{}", i + 1),
            task_id: id.clone(),
            similarity: if i == 0 { 1.0 } else { ranking.neighbors[i - 1].similarity },
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let weight = similarity(vectors[i], vectors[j])?;
            if weight >= threshold {
                edges.push(GraphEdge { i, j, weight });
            }
        }
    }
    Ok(CorrelationGraph { nodes, edges, threshold })
}

/// min/max of two lengths; 1 when both are zero, 0 when exactly one is.
pub fn length_ratio(a: usize, b: usize) -> f64 {
    match (a, b) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => a.min(b) as f64 / a.max(b) as f64,
    }
}

/// Pairwise relation matrix over `tasks` for one instruction component.
pub fn build_chord(
    tasks: &[&TaskRecord],
    relation: ChordRelation,
    component: &ComponentSelector,
    threshold: f64,
) -> Result<ChordMatrix, RelationError> {
    if component.is_instance() {
        return Err(RelationError::InvalidComponent(component.clone()));
    }
    check_threshold(threshold)?;
    let n = tasks.len();
    let mut values = vec![vec![1.0; n]; n];
    match relation {
        ChordRelation::NormWordOverlap => {
            let sets = tasks
                .iter()
                .map(|t| Ok(Analyzer::new(t.language()).lemma_set(&component_text(t, component)?)))
                .collect::<Result<Vec<_>, MetricError>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let v = overlap_sets(&sets[i], &sets[j]);
                    values[i][j] = v;
                    values[j][i] = v;
                }
            }
        }
        ChordRelation::NormLengthRatio => {
            let lengths = tasks
                .iter()
                .map(|t| sample_length(t, component))
                .collect::<Result<Vec<_>, _>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let v = length_ratio(lengths[i], lengths[j]);
                    values[i][j] = v;
                    values[j][i] = v;
                }
            }
        }
    }
    Ok(ChordMatrix {
        relation,
        component: component.clone(),
        task_ids: tasks.iter().map(|t| t.task_id.clone()).collect(),
        values,
        threshold,
    })
}

#[cfg(test)]
mod tests;
