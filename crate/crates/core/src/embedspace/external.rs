//! Precomputed embeddings loaded from a text file.
//!
//! Format: a header `dim=<D> count=<N>`, then one line per task:
//! `<task_id> <D floats>` separated by whitespace.

use std::fmt::Write as _;
use std::path::Path;

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, Embeddings};
use crate::corpus::TaskRecord;

pub fn parse_embedding_file(text: &str) -> Result<Embeddings, EmbedError> {
    let err = |line: usize, msg: &str| EmbedError::File(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let mut dim = None;
    let mut count = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("dim", v)) => dim = v.parse::<usize>().ok(),
            Some(("count", v)) => count = v.parse::<usize>().ok(),
            _ => return Err(err(1, &format!("unexpected header field `{field}`"))),
        }
    }
    let (Some(dim), Some(count)) = (dim, count) else {
        return Err(err(1, "header must be `dim=<D> count=<N>`"));
    };
    if dim == 0 {
        return Err(err(1, "dim must be positive"));
    }
    let mut out = Embeddings::new();
    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let id = parts.next().expect("non-empty line");
        let values = parts
            .map(|p| p.parse::<f64>().map_err(|_| err(i + 1, &format!("bad float `{p}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(EmbedError::DimensionMismatch { expected: dim, found: values.len() });
        }
        let v = EmbeddingVector::normalized(values).ok_or_else(|| err(i + 1, "zero or non-finite vector"))?;
        if out.insert(id.to_string(), v).is_some() {
            return Err(err(i + 1, &format!("duplicate task id `{id}`")));
        }
    }
    if out.len() != count {
        return Err(EmbedError::File(format!("header says {count} vectors, found {}", out.len())));
    }
    Ok(out)
}

pub fn write_embedding_file(embeddings: &Embeddings) -> String {
    let dim = embeddings.values().next().map_or(0, |v| v.dim());
    let mut out = format!("dim={dim} count={}\n", embeddings.len());
    for (id, v) in embeddings {
        out.push_str(id);
        for x in v.values() {
            write!(out, " {x:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Serves vectors computed out of band, e.g. by a neural sentence encoder.
#[derive(Debug, Clone)]
pub struct ExternalProvider {
    vectors: Embeddings,
}

impl ExternalProvider {
    pub fn new(vectors: Embeddings) -> Self {
        ExternalProvider { vectors }
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path).map_err(|e| EmbedError::File(format!("{}: {e}", path.display())))?;
        Ok(ExternalProvider::new(parse_embedding_file(&text)?))
    }
}

impl EmbeddingProvider for ExternalProvider {
    fn name(&self) -> &str {
        "external"
    }

    fn embed(&self, tasks: &[&TaskRecord]) -> Result<Embeddings, EmbedError> {
        let out = tasks
            .iter()
            .map(|t| Ok((t.task_id.clone(), self.embed_one(t)?)))
            .collect::<Result<Embeddings, EmbedError>>()?;
        super::check_dimensions(&out)?;
        Ok(out)
    }

    /// Modified versions keep the vector of their task id, since the file
    /// cannot know about edits.
    fn embed_one(&self, task: &TaskRecord) -> Result<EmbeddingVector, EmbedError> {
        self.vectors
            .get(&task.task_id)
            .cloned()
            .ok_or_else(|| EmbedError::ProviderError {
                task_id: task.task_id.clone(),
                reason: "no vector in embedding file".to_string(),
            })
    }
}
