//! Per-analyst session state and the panel payloads derived from it.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Engine, ServiceError};
use crate::biasmetrics::{heatmap_rows, task_metric, BinHeatRow, ComponentSelector, ItemUnit, MetricKind, MetricValue};
use crate::corpus::{CategoryBasis, Example, TaskRecord};
use crate::embedspace::{nearest_neighbors, NeighborRanking};
use crate::evalharness::{BinSummary, EvalConfig, EvalRun, RunStatus};
use crate::relations::{build_chord, build_graph, selection, ChordMatrix, ChordRelation, CorrelationGraph, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootStamp {
    pub task_id: String,
    pub version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PanelKind {
    Overview,
    Correlation,
    Chord,
    Beeswarm,
    Metrics,
}

/// A panel body stamped with the root it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelPayload<T> {
    pub kind: PanelKind,
    pub session_id: String,
    pub root: RootStamp,
    pub body: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub root: RootStamp,
    pub k: usize,
    pub link_threshold: f64,
    pub chord_threshold: f64,
    pub chord_relation: ChordRelation,
    pub chord_component: ComponentSelector,
    pub selected_metrics: Vec<MetricKind>,
    pub metric_component: ComponentSelector,
    pub category_basis: CategoryBasis,
    /// Latest run id per task in the selection.
    pub latest_eval: BTreeMap<String, String>,
    pub ranking: NeighborRanking,
}

impl SessionState {
    /// Root first, then neighbours by rank.
    pub fn selection(&self) -> Vec<String> {
        selection(&self.ranking)
    }

    pub fn label_of(&self, task_id: &str) -> Option<String> {
        self.selection().iter().position(|t| t == task_id).map(|i| format!("T{}", i + 1))
    }
}

pub fn default_metrics() -> Vec<MetricKind> {
    vec![
        MetricKind::SampleLength,
        MetricKind::UniqueVocab,
        MetricKind::Overlap(ItemUnit::Word),
        MetricKind::Jaccard(ItemUnit::Word),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmColumn {
    pub label: String,
    pub task_id: String,
    pub version: u32,
    pub run_id: Option<String>,
    pub status: Option<RunStatus>,
    pub overall: Option<f64>,
    pub bins: Vec<BinSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmBody {
    pub columns: Vec<BeeswarmColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatEntry {
    pub metric: MetricKind,
    pub row: BinHeatRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub label: String,
    pub task_id: String,
    pub version: u32,
    pub values: Vec<MetricValue>,
    pub heat: Vec<HeatEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBody {
    pub component: ComponentSelector,
    pub metrics: Vec<MetricKind>,
    pub tasks: Vec<TaskMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleSet {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleReplacement {
    pub set: ExampleSet,
    pub index: usize,
    pub example: Example,
}

/// Whole-list replacements apply before single-example replacements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleEdits {
    #[serde(default)]
    pub positive: Option<Vec<Example>>,
    #[serde(default)]
    pub negative: Option<Vec<Example>>,
    #[serde(default)]
    pub replace: Vec<ExampleReplacement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifyRequest {
    pub task_id: String,
    #[serde(default)]
    pub definition: Option<String>,
    #[serde(default)]
    pub examples: Option<ExampleEdits>,
}

impl ModifyRequest {
    fn apply(&self, base: &TaskRecord) -> Result<TaskRecord, ServiceError> {
        let mut task = base.clone();
        if let Some(d) = &self.definition {
            task.definition = d.clone();
        }
        if let Some(edits) = &self.examples {
            if let Some(p) = &edits.positive {
                task.positive_examples = p.clone();
            }
            if let Some(n) = &edits.negative {
                task.negative_examples = n.clone();
            }
            for r in &edits.replace {
                let list = match r.set {
                    ExampleSet::Positive => &mut task.positive_examples,
                    ExampleSet::Negative => &mut task.negative_examples,
                };
                let len = list.len();
                let slot = list.get_mut(r.index).ok_or_else(|| {
                    ServiceError::InvalidParameter(format!("example index {} out of range (have {len})", r.index))
                })?;
                *slot = r.example.clone();
            }
        }
        Ok(task)
    }
}

fn check_unit(name: &str, v: f64) -> Result<f64, ServiceError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ServiceError::InvalidParameter(format!("{name} must be in [0, 1], got {v}")))
    }
}

impl Engine {
    fn session_handle(&self, sid: &str) -> Result<Arc<Mutex<SessionState>>, ServiceError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(sid)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(sid.to_string()))
    }

    pub fn session(&self, sid: &str) -> Result<SessionState, ServiceError> {
        Ok(self.session_handle(sid)?.lock().expect("session poisoned").clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.lock().expect("session table poisoned").keys().cloned().collect()
    }

    fn rank(&self, task_id: &str, k: usize) -> Result<NeighborRanking, ServiceError> {
        let embeddings = self.embeddings.read().expect("embeddings poisoned");
        Ok(nearest_neighbors(&embeddings, task_id, k)?)
    }

    /// Selects `task_id` (its latest version) as root, creating the session
    /// on first use. On error the session is left as it was.
    pub fn set_root(&self, sid: &str, task_id: &str) -> Result<SessionState, ServiceError> {
        self.set_root_with_k(sid, task_id, None)
    }

    pub fn set_root_with_k(&self, sid: &str, task_id: &str, k: Option<usize>) -> Result<SessionState, ServiceError> {
        let version = self.get_task(task_id, None)?.version;
        let existing = self.session_handle(sid).ok();
        let guard = existing.as_ref().map(|h| h.lock().expect("session poisoned"));
        let k = k.or(guard.as_ref().map(|s| s.k)).unwrap_or(self.config.k);
        if k == 0 {
            return Err(ServiceError::InvalidParameter("k must be at least 1".into()));
        }
        let ranking = self.rank(task_id, k)?;
        let root = RootStamp { task_id: task_id.to_string(), version };
        match guard {
            Some(mut state) => {
                state.root = root;
                state.k = k;
                state.ranking = ranking;
                let keep = state.selection();
                state.latest_eval.retain(|t, _| keep.contains(t));
                Ok(state.clone())
            }
            None => {
                let state = SessionState {
                    session_id: sid.to_string(),
                    root,
                    k,
                    link_threshold: DEFAULT_THRESHOLD,
                    chord_threshold: DEFAULT_THRESHOLD,
                    chord_relation: ChordRelation::NormWordOverlap,
                    chord_component: ComponentSelector::FullInstruction,
                    selected_metrics: default_metrics(),
                    metric_component: ComponentSelector::FullInstruction,
                    category_basis: CategoryBasis::TaskType,
                    latest_eval: BTreeMap::new(),
                    ranking,
                };
                let mut sessions = self.sessions.lock().expect("session table poisoned");
                sessions.insert(sid.to_string(), Arc::new(Mutex::new(state.clone())));
                Ok(state)
            }
        }
    }

    /// Selection records: the root at its stamped version, neighbours at
    /// their latest.
    fn selection_tasks(&self, state: &SessionState) -> Result<Vec<Arc<TaskRecord>>, ServiceError> {
        state
            .selection()
            .iter()
            .enumerate()
            .map(|(i, id)| self.get_task(id, (i == 0).then_some(state.root.version)))
            .collect()
    }

    fn stamp<T>(state: &SessionState, kind: PanelKind, body: T) -> PanelPayload<T> {
        PanelPayload { kind, session_id: state.session_id.clone(), root: state.root.clone(), body }
    }

    pub fn correlation(&self, sid: &str, threshold: Option<f64>) -> Result<PanelPayload<CorrelationGraph>, ServiceError> {
        let handle = self.session_handle(sid)?;
        let mut state = handle.lock().expect("session poisoned");
        let threshold = check_unit("threshold", threshold.unwrap_or(state.link_threshold))?;
        let graph = {
            let embeddings = self.embeddings.read().expect("embeddings poisoned");
            build_graph(&state.ranking, &embeddings, threshold)?
        };
        state.link_threshold = threshold;
        Ok(Self::stamp(&state, PanelKind::Correlation, graph))
    }

    pub fn chord(
        &self,
        sid: &str,
        relation: Option<ChordRelation>,
        component: Option<ComponentSelector>,
        threshold: Option<f64>,
    ) -> Result<PanelPayload<ChordMatrix>, ServiceError> {
        let handle = self.session_handle(sid)?;
        let mut state = handle.lock().expect("session poisoned");
        let relation = relation.unwrap_or(state.chord_relation);
        let component = component.unwrap_or_else(|| state.chord_component.clone());
        let threshold = check_unit("threshold", threshold.unwrap_or(state.chord_threshold))?;
        let tasks = self.selection_tasks(&state)?;
        let refs: Vec<&TaskRecord> = tasks.iter().map(|t| t.as_ref()).collect();
        let matrix = build_chord(&refs, relation, &component, threshold)?;
        state.chord_relation = relation;
        state.chord_component = component;
        state.chord_threshold = threshold;
        Ok(Self::stamp(&state, PanelKind::Chord, matrix))
    }

    pub fn beeswarm(&self, sid: &str) -> Result<PanelPayload<BeeswarmBody>, ServiceError> {
        let handle = self.session_handle(sid)?;
        let state = handle.lock().expect("session poisoned");
        let tasks = self.selection_tasks(&state)?;
        let columns = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let run = state
                    .latest_eval
                    .get(&t.task_id)
                    .and_then(|id| self.runs.get(id))
                    .filter(|r| r.version == t.version);
                BeeswarmColumn {
                    label: format!("T{}", i + 1),
                    task_id: t.task_id.clone(),
                    version: t.version,
                    run_id: run.as_ref().map(|r| r.run_id.clone()),
                    status: run.as_ref().map(|r| r.status),
                    overall: run.as_ref().and_then(|r| r.overall),
                    bins: run.map(|r| r.bins).unwrap_or_default(),
                }
            })
            .collect();
        Ok(Self::stamp(&state, PanelKind::Beeswarm, BeeswarmBody { columns }))
    }

    pub fn metrics(
        &self,
        sid: &str,
        metrics: Option<Vec<MetricKind>>,
        component: Option<ComponentSelector>,
    ) -> Result<PanelPayload<MetricsBody>, ServiceError> {
        let handle = self.session_handle(sid)?;
        let mut state = handle.lock().expect("session poisoned");
        let metrics = metrics.unwrap_or_else(|| state.selected_metrics.clone());
        let component = component.unwrap_or_else(|| state.metric_component.clone());
        if component.is_instance() {
            return Err(ServiceError::InvalidParameter("metric component must be instruction-side".into()));
        }
        let tasks = self.selection_tasks(&state)?;
        let mut out = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            let mut values = Vec::new();
            let mut heat = Vec::new();
            for m in &metrics {
                values.push(task_metric(task, *m, &component)?);
                if let Some(pair) = m.pairwise() {
                    let row = heatmap_rows(&[task.as_ref()], pair, &component)?.remove(0);
                    heat.push(HeatEntry { metric: *m, row });
                }
            }
            out.push(TaskMetrics {
                label: format!("T{}", i + 1),
                task_id: task.task_id.clone(),
                version: task.version,
                values,
                heat,
            });
        }
        state.selected_metrics = metrics.clone();
        state.metric_component = component.clone();
        Ok(Self::stamp(&state, PanelKind::Metrics, MetricsBody { component, metrics, tasks: out }))
    }

    /// Saves an edited copy of a selected task as a new version and makes it
    /// the root. A failed edit leaves corpus, session and payloads unchanged.
    pub fn modify_instruction(&self, sid: &str, req: &ModifyRequest) -> Result<(u32, SessionState), ServiceError> {
        let handle = self.session_handle(sid)?;
        let mut state = handle.lock().expect("session poisoned");
        if !state.selection().contains(&req.task_id) {
            return Err(ServiceError::NotInSelection(req.task_id.clone()));
        }
        let base = self.get_task(&req.task_id, None)?;
        let modified = req.apply(&base)?;
        let stored = self.commit_version(modified)?;
        let ranking = self.rank(&stored.task_id, state.k)?;
        state.root = RootStamp { task_id: stored.task_id.clone(), version: stored.version };
        state.ranking = ranking;
        let keep = state.selection();
        state.latest_eval.retain(|t, _| keep.contains(t));
        Ok((stored.version, state.clone()))
    }

    /// Starts a background evaluation of a selected task.
    pub fn run_eval(&self, sid: &str, task_id: &str, limit: Option<usize>, client: &str) -> Result<EvalRun, ServiceError> {
        let handle = self.session_handle(sid)?;
        let mut state = handle.lock().expect("session poisoned");
        let position = state
            .selection()
            .iter()
            .position(|t| t == task_id)
            .ok_or_else(|| ServiceError::NotInSelection(task_id.to_string()))?;
        let version = (position == 0).then_some(state.root.version);
        let task = self.get_task(task_id, version)?;
        let client = self.client(client)?;
        let config = EvalConfig { limit: limit.unwrap_or(self.config.eval.limit), ..self.config.eval.clone() };
        if config.limit == 0 {
            return Err(ServiceError::InvalidParameter("limit must be at least 1".into()));
        }
        let run = self.runs.start(task, client, config)?;
        state.latest_eval.insert(task_id.to_string(), run.run_id.clone());
        Ok(run)
    }
}
