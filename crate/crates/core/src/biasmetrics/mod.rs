//! Diversity, similarity and component-bias metrics over instruction
//! sub-components and task instances.
//!
//! Word-level items are lemmas after stop-word removal. N-gram items are raw
//! token windows taken before stop-word removal, since dropping stop-words
//! would splice together words that were never adjacent.

mod binning;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Example, Instance, TaskRecord};
use crate::textproc::{ngrams, Analyzer, PosClass, TextError};

pub use binning::{bin_edges, bin_index, bin_means, CompensatedSum};
pub use report::{metric_report, write_report_csv, ReportRow};

/// Heatmap bin count.
pub const HEATMAP_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("target and baseline selectors must differ (both {0})")]
    InvalidSelectors(ComponentSelector),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Which part of a task a metric looks at.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "instance_id")]
pub enum ComponentSelector {
    FullInstruction,
    Definition,
    PositiveExamples,
    NegativeExamples,
    BothExamples,
    Instance(String),
}

impl ComponentSelector {
    /// Instruction-side selectors, i.e. everything except instances.
    pub const INSTRUCTION_KINDS: [ComponentSelector; 5] = [
        ComponentSelector::FullInstruction,
        ComponentSelector::Definition,
        ComponentSelector::PositiveExamples,
        ComponentSelector::NegativeExamples,
        ComponentSelector::BothExamples,
    ];

    pub fn parse(s: &str) -> Option<ComponentSelector> {
        let lower = s.trim().to_ascii_lowercase().replace('-', "_");
        match lower.as_str() {
            "full" | "full_instruction" | "instruction" => Some(ComponentSelector::FullInstruction),
            "definition" => Some(ComponentSelector::Definition),
            "positive" | "positive_examples" => Some(ComponentSelector::PositiveExamples),
            "negative" | "negative_examples" => Some(ComponentSelector::NegativeExamples),
            "both" | "both_examples" | "examples" => Some(ComponentSelector::BothExamples),
            _ if lower.starts_with("instance:") => {
                Some(ComponentSelector::Instance(s.trim()["instance:".len()..].to_string()))
            }
            _ => None,
        }
    }

    pub fn is_instance(&self) -> bool {
        matches!(self, ComponentSelector::Instance(_))
    }
}

impl fmt::Display for ComponentSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentSelector::FullInstruction => f.write_str("full_instruction"),
            ComponentSelector::Definition => f.write_str("definition"),
            ComponentSelector::PositiveExamples => f.write_str("positive_examples"),
            ComponentSelector::NegativeExamples => f.write_str("negative_examples"),
            ComponentSelector::BothExamples => f.write_str("both_examples"),
            ComponentSelector::Instance(id) => write!(f, "instance:{id}"),
        }
    }
}

/// The item a set-based metric compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum ItemUnit {
    Word,
    Ngram(usize),
    Pos(PosClass),
}

impl ItemUnit {
    /// Accepts `word`, `ngram2` / `ngram:2`, `pos-noun` / `pos:noun`.
    pub fn parse(s: &str) -> Option<ItemUnit> {
        let s = s.trim().to_ascii_lowercase();
        if s == "word" || s == "words" {
            return Some(ItemUnit::Word);
        }
        if let Some(rest) = s.strip_prefix("ngram") {
            let n: usize = rest.trim_start_matches([':', '-', '_']).parse().ok()?;
            return (n >= 1).then_some(ItemUnit::Ngram(n));
        }
        if let Some(rest) = s.strip_prefix("pos") {
            return PosClass::parse(rest.trim_start_matches([':', '-', '_'])).map(ItemUnit::Pos);
        }
        None
    }
}

impl fmt::Display for ItemUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemUnit::Word => f.write_str("word"),
            ItemUnit::Ngram(n) => write!(f, "ngram{n}"),
            ItemUnit::Pos(class) => write!(f, "pos-{class}"),
        }
    }
}

/// A metric from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum MetricKind {
    SampleLength,
    UniqueVocab,
    NgramFreq(usize),
    PosFreq(PosClass),
    Overlap(ItemUnit),
    Jaccard(ItemUnit),
    ComponentCorrelation,
}

impl MetricKind {
    /// Parses `sample_length`, `unique_vocab`, `ngram_freq:2`, `pos_freq:noun`,
    /// `jaccard:word`, `overlap:ngram2`, `correlation`.
    pub fn parse(s: &str) -> Result<MetricKind, MetricError> {
        let unknown = || MetricError::UnknownMetric(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let metric = match (name, arg) {
            ("sample_length" | "length", None) => MetricKind::SampleLength,
            ("unique_vocab" | "unique_vocabulary", None) => MetricKind::UniqueVocab,
            ("ngram_freq", Some(n)) => MetricKind::NgramFreq(n.parse().ok().filter(|n| *n >= 1).ok_or_else(unknown)?),
            ("pos_freq", Some(c)) => MetricKind::PosFreq(PosClass::parse(c).ok_or_else(unknown)?),
            ("jaccard", a) => MetricKind::Jaccard(ItemUnit::parse(a.unwrap_or("word")).ok_or_else(unknown)?),
            ("overlap", a) => MetricKind::Overlap(ItemUnit::parse(a.unwrap_or("word")).ok_or_else(unknown)?),
            ("correlation" | "component_correlation", None) => MetricKind::ComponentCorrelation,
            _ => return Err(unknown()),
        };
        Ok(metric)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::SampleLength => "sample_length",
            MetricKind::UniqueVocab => "unique_vocab",
            MetricKind::NgramFreq(_) => "ngram_freq",
            MetricKind::PosFreq(_) => "pos_freq",
            MetricKind::Overlap(_) => "overlap",
            MetricKind::Jaccard(_) => "jaccard",
            MetricKind::ComponentCorrelation => "correlation",
        }
    }

    /// Label of the counted or compared item.
    pub fn unit_label(&self) -> String {
        match self {
            MetricKind::SampleLength => "token".to_string(),
            MetricKind::UniqueVocab => "lemma".to_string(),
            MetricKind::NgramFreq(n) => ItemUnit::Ngram(*n).to_string(),
            MetricKind::PosFreq(c) => ItemUnit::Pos(*c).to_string(),
            MetricKind::Overlap(u) | MetricKind::Jaccard(u) => u.to_string(),
            MetricKind::ComponentCorrelation => "lemma-tf".to_string(),
        }
    }

    /// Pairwise metrics compare a component against each instance.
    pub fn pairwise(&self) -> Option<PairMetric> {
        match self {
            MetricKind::Overlap(u) => Some(PairMetric::Overlap(*u)),
            MetricKind::Jaccard(u) => Some(PairMetric::Jaccard(*u)),
            MetricKind::ComponentCorrelation => Some(PairMetric::Correlation),
            _ => None,
        }
    }

    pub fn value_unit(&self) -> ValueUnit {
        if self.pairwise().is_some() {
            ValueUnit::Ratio
        } else {
            ValueUnit::Count
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::SampleLength | MetricKind::UniqueVocab | MetricKind::ComponentCorrelation => {
                f.write_str(self.name())
            }
            MetricKind::NgramFreq(n) => write!(f, "ngram_freq:{n}"),
            MetricKind::PosFreq(c) => write!(f, "pos_freq:{c}"),
            _ => write!(f, "{}:{}", self.name(), self.unit_label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueUnit {
    Count,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricKind,
    pub value: f64,
    pub unit: ValueUnit,
}

/// A set-based or vector-based comparison between two texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "unit")]
pub enum PairMetric {
    Overlap(ItemUnit),
    Jaccard(ItemUnit),
    Correlation,
}

impl PairMetric {
    pub fn compute(&self, a: &str, b: &str, analyzer: &Analyzer) -> Result<f64, MetricError> {
        match *self {
            PairMetric::Overlap(unit) => overlap(a, b, unit, analyzer),
            PairMetric::Jaccard(unit) => jaccard(a, b, unit, analyzer),
            PairMetric::Correlation => Ok(component_correlation(a, b, analyzer)),
        }
    }

    pub fn kind(&self) -> MetricKind {
        match *self {
            PairMetric::Overlap(u) => MetricKind::Overlap(u),
            PairMetric::Jaccard(u) => MetricKind::Jaccard(u),
            PairMetric::Correlation => MetricKind::ComponentCorrelation,
        }
    }
}

/// Per-task heatmap row: mean metric value per instance-similarity bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinHeatRow {
    pub task_id: String,
    pub version: u32,
    /// `None` where no instance fell in the bin.
    pub bins: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub bin_edges: Vec<f64>,
}

fn example_block(e: &Example) -> String {
    format!("{}\n{}\n{}", e.input, e.output, e.explanation)
}

fn examples_text(examples: &[Example]) -> String {
    examples.iter().map(example_block).collect::<Vec<_>>().join("\n")
}

/// Text of one component. Examples render as `input\noutput\nexplanation`
/// blocks joined by newlines, positives before negatives; the full
/// instruction is the definition followed by both example sets.
pub fn component_text(task: &TaskRecord, sel: &ComponentSelector) -> Result<String, MetricError> {
    Ok(match sel {
        ComponentSelector::Definition => task.definition.clone(),
        ComponentSelector::PositiveExamples => examples_text(&task.positive_examples),
        ComponentSelector::NegativeExamples => examples_text(&task.negative_examples),
        ComponentSelector::BothExamples => {
            let all: Vec<Example> = task
                .positive_examples
                .iter()
                .chain(&task.negative_examples)
                .cloned()
                .collect();
            examples_text(&all)
        }
        ComponentSelector::FullInstruction => {
            let examples = component_text(task, &ComponentSelector::BothExamples)?;
            if examples.is_empty() {
                task.definition.clone()
            } else {
                format!("{}\n{}", task.definition, examples)
            }
        }
        ComponentSelector::Instance(id) => task
            .instance(id)
            .map(|i| i.input.clone())
            .ok_or_else(|| MetricError::UnknownInstance(id.clone()))?,
    })
}

fn analyzer_for(task: &TaskRecord) -> Analyzer {
    Analyzer::new(task.language())
}

/// Token count of the component, stop-words included.
pub fn sample_length(task: &TaskRecord, sel: &ComponentSelector) -> Result<usize, MetricError> {
    Ok(analyzer_for(task).tokens(&component_text(task, sel)?).len())
}

/// Lemmas in `target` that `baseline` never uses.
pub fn unique_vocabulary(
    task: &TaskRecord,
    target: &ComponentSelector,
    baseline: &ComponentSelector,
) -> Result<usize, MetricError> {
    if target == baseline {
        return Err(MetricError::InvalidSelectors(target.clone()));
    }
    let analyzer = analyzer_for(task);
    let t = analyzer.lemma_set(&component_text(task, target)?);
    let b = analyzer.lemma_set(&component_text(task, baseline)?);
    Ok(t.difference(&b).count())
}

/// Highest frequency of any single n-gram in the component.
pub fn ngram_frequency(task: &TaskRecord, sel: &ComponentSelector, n: usize) -> Result<usize, MetricError> {
    let tokens = analyzer_for(task).tokens(&component_text(task, sel)?);
    Ok(ngrams(&tokens, n)?.max_frequency())
}

/// Number of tokens in the component tagged with `class`.
pub fn pos_frequency(task: &TaskRecord, sel: &ComponentSelector, class: PosClass) -> Result<usize, MetricError> {
    Ok(analyzer_for(task).pos_count(&component_text(task, sel)?, class)?)
}

/// The comparable item set of `text` under `unit`.
pub fn item_set(text: &str, unit: ItemUnit, analyzer: &Analyzer) -> Result<BTreeSet<String>, MetricError> {
    match unit {
        ItemUnit::Word => Ok(analyzer.lemma_set(text)),
        ItemUnit::Ngram(n) => {
            let tokens = analyzer.tokens(text);
            // tokens never contain spaces, so joining is injective
            Ok(ngrams(&tokens, n)?
                .counts()
                .keys()
                .map(|g| g.join(" "))
                .collect())
        }
        ItemUnit::Pos(class) => Ok(analyzer.pos_lemma_set(text, class)?),
    }
}

/// |A ∩ B| / |A ∪ B|, 0 when both are empty.
pub fn jaccard_sets<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// |A ∩ B| / min(|A|, |B|), 0 when either is empty.
pub fn overlap_sets<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / smaller as f64
    }
}

/// Cosine between two sparse count vectors; 0 if either is all-zero.
pub fn cosine_counts<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(k, x)| b.get(k).map(|y| (*x as f64) * (*y as f64)))
        .sum();
    let norm = |m: &BTreeMap<K, usize>| m.values().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

pub fn jaccard(a: &str, b: &str, unit: ItemUnit, analyzer: &Analyzer) -> Result<f64, MetricError> {
    Ok(jaccard_sets(&item_set(a, unit, analyzer)?, &item_set(b, unit, analyzer)?))
}

pub fn overlap(a: &str, b: &str, unit: ItemUnit, analyzer: &Analyzer) -> Result<f64, MetricError> {
    Ok(overlap_sets(&item_set(a, unit, analyzer)?, &item_set(b, unit, analyzer)?))
}

fn lemma_counts(text: &str, analyzer: &Analyzer) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for lemma in analyzer.content_lemmas(text) {
        *counts.entry(lemma).or_insert(0) += 1;
    }
    counts
}

/// Cosine similarity of lemma term-frequency vectors (stop-words removed).
pub fn component_correlation(a: &str, b: &str, analyzer: &Analyzer) -> f64 {
    cosine_counts(&lemma_counts(a, analyzer), &lemma_counts(b, analyzer))
}

/// Share of the instance's lemmas that also occur somewhere in the task's
/// positive or negative examples.
pub fn instance_similarity(instance: &Instance, task: &TaskRecord) -> f64 {
    let analyzer = analyzer_for(task);
    let examples = component_text(task, &ComponentSelector::BothExamples).unwrap_or_default();
    instance_similarity_with(&analyzer.lemma_set(&instance.input), &analyzer.lemma_set(&examples))
}

pub(crate) fn instance_similarity_with(instance: &BTreeSet<String>, examples: &BTreeSet<String>) -> f64 {
    if instance.is_empty() {
        0.0
    } else {
        instance.intersection(examples).count() as f64 / instance.len() as f64
    }
}

/// Instance similarity for every instance of `task`, in stored order.
pub fn instance_similarities(task: &TaskRecord) -> Vec<f64> {
    let analyzer = analyzer_for(task);
    let examples = analyzer.lemma_set(&component_text(task, &ComponentSelector::BothExamples).unwrap_or_default());
    task.instances
        .iter()
        .map(|i| instance_similarity_with(&analyzer.lemma_set(&i.input), &examples))
        .collect()
}

/// Bins each task's instances by [`instance_similarity`] into ten
/// equal-width bins and averages `metric(component, instance input)` per bin.
pub fn heatmap_rows(
    tasks: &[&TaskRecord],
    metric: PairMetric,
    sel: &ComponentSelector,
) -> Result<Vec<BinHeatRow>, MetricError> {
    tasks
        .iter()
        .map(|task| {
            let analyzer = analyzer_for(task);
            let component = component_text(task, sel)?;
            let pairs = task
                .instances
                .iter()
                .zip(instance_similarities(task))
                .map(|(inst, sim)| Ok((sim, metric.compute(&component, &inst.input, &analyzer)?)))
                .collect::<Result<Vec<_>, MetricError>>()?;
            let (counts, bins) = bin_means(&pairs, HEATMAP_BINS);
            Ok(BinHeatRow {
                task_id: task.task_id.clone(),
                version: task.version,
                bins,
                counts,
                bin_edges: bin_edges(HEATMAP_BINS),
            })
        })
        .collect()
}

/// Mean of `metric(component, instance input)` over every instance.
pub fn mean_instance_metric(task: &TaskRecord, metric: PairMetric, sel: &ComponentSelector) -> Result<f64, MetricError> {
    let analyzer = analyzer_for(task);
    let component = component_text(task, sel)?;
    let mut sum = CompensatedSum::default();
    for inst in &task.instances {
        sum.add(metric.compute(&component, &inst.input, &analyzer)?);
    }
    Ok(if task.instances.is_empty() {
        0.0
    } else {
        sum.total() / task.instances.len() as f64
    })
}

/// Value of a per-task (non-pairwise) metric; pairwise metrics return their
/// mean over instances.
pub fn task_metric(task: &TaskRecord, metric: MetricKind, sel: &ComponentSelector) -> Result<MetricValue, MetricError> {
    let value = match metric {
        MetricKind::SampleLength => sample_length(task, sel)? as f64,
        MetricKind::UniqueVocab => {
            let (target, baseline) = match sel {
                ComponentSelector::Definition => (ComponentSelector::BothExamples, ComponentSelector::Definition),
                other => (other.clone(), ComponentSelector::Definition),
            };
            unique_vocabulary(task, &target, &baseline)? as f64
        }
        MetricKind::NgramFreq(n) => ngram_frequency(task, sel, n)? as f64,
        MetricKind::PosFreq(class) => pos_frequency(task, sel, class)? as f64,
        _ => {
            let pair = metric.pairwise().expect("remaining kinds are pairwise");
            mean_instance_metric(task, pair, sel)?
        }
    };
    Ok(MetricValue {
        metric,
        value,
        unit: metric.value_unit(),
    })
}
