//! Analysis sessions over a shared corpus: root selection, panel payloads,
//! instruction modification and background evaluation runs.

mod report;
mod runs;
mod session;

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasmetrics::MetricError;
use crate::corpus::{CategoryBasis, CorpusError, TaskCorpus, TaskFilter, TaskRecord, TaskSummary};
use crate::embedspace::{
    place_incremental, project_tsne, EmbedError, EmbeddingProvider, Embeddings, ProjectionPoint, TsneConfig,
    DEFAULT_K,
};
use crate::evalharness::{EchoClient, EvalConfig, EvalError, EvalRun, ModelClient};
use crate::relations::RelationError;

pub use report::{cli_report, ReportOptions, ReportOutcome, EXIT_INVALID, EXIT_OK, EXIT_PARTIAL};
pub use runs::RunRegistry;
pub use session::{
    BeeswarmBody, BeeswarmColumn, ExampleEdits, ExampleReplacement, ExampleSet, HeatEntry, MetricsBody, ModifyRequest,
    default_metrics, PanelKind, PanelPayload, RootStamp, SessionState, TaskMetrics,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown version {version} of task `{task_id}`")]
    UnknownVersion { task_id: String, version: u32 },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("task `{0}` is not in the current selection")]
    NotInSelection(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("a run for `{task_id}` v{version} is already active ({run_id})")]
    ConcurrentRunExists { task_id: String, version: u32, run_id: String },
    #[error(transparent)]
    Schema(CorpusError),
    #[error(transparent)]
    Corpus(CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<CorpusError> for ServiceError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::UnknownTask(id) => ServiceError::UnknownTask(id),
            CorpusError::UnknownVersion { task_id, version } => ServiceError::UnknownVersion { task_id, version },
            e @ CorpusError::Schema { .. } => ServiceError::Schema(e),
            e => ServiceError::Corpus(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub seed: u64,
    pub k: usize,
    pub tsne: TsneConfig,
    pub eval: EvalConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { seed: 0, k: DEFAULT_K, tsne: TsneConfig::default(), eval: EvalConfig::default() }
    }
}

impl EngineConfig {
    pub fn with_seed(seed: u64) -> Self {
        EngineConfig {
            seed,
            tsne: TsneConfig { seed, ..TsneConfig::default() },
            eval: EvalConfig { seed, ..EvalConfig::default() },
            ..EngineConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewPayload {
    pub dims: usize,
    pub basis: CategoryBasis,
    pub points: Vec<ProjectionPoint>,
    /// Tasks placed by neighbour interpolation since the last full projection.
    pub incremental: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct ProjectionCache {
    points: Vec<ProjectionPoint>,
    incremental: Vec<String>,
}

/// Shared state behind the HTTP API and the library entry points.
pub struct Engine {
    config: EngineConfig,
    corpus: RwLock<TaskCorpus>,
    provider: Box<dyn EmbeddingProvider>,
    embeddings: RwLock<Embeddings>,
    projections: Mutex<BTreeMap<usize, ProjectionCache>>,
    runs: Arc<RunRegistry>,
    clients: RwLock<BTreeMap<String, Arc<dyn ModelClient>>>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<SessionState>>>>,
}

impl Engine {
    /// Embeds every current task. The echo client is registered by default.
    pub fn new(corpus: TaskCorpus, provider: Box<dyn EmbeddingProvider>, config: EngineConfig) -> Result<Engine, ServiceError> {
        let tasks: Vec<&TaskRecord> = corpus.current().map(|t| t.as_ref()).collect();
        let embeddings = provider.embed(&tasks)?;
        let mut clients: BTreeMap<String, Arc<dyn ModelClient>> = BTreeMap::new();
        clients.insert("echo".to_string(), Arc::new(EchoClient));
        Ok(Engine {
            config,
            corpus: RwLock::new(corpus),
            provider,
            embeddings: RwLock::new(embeddings),
            projections: Mutex::new(BTreeMap::new()),
            runs: Arc::new(RunRegistry::default()),
            clients: RwLock::new(clients),
            sessions: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn register_client(&self, name: &str, client: Arc<dyn ModelClient>) {
        self.clients.write().expect("client table poisoned").insert(name.to_string(), client);
    }

    pub fn client_names(&self) -> Vec<String> {
        self.clients.read().expect("client table poisoned").keys().cloned().collect()
    }

    pub(crate) fn client(&self, name: &str) -> Result<Arc<dyn ModelClient>, ServiceError> {
        self.clients
            .read()
            .expect("client table poisoned")
            .get(name)
            .cloned()
            .ok_or_else(|| ServiceError::ClientUnavailable(format!("no client named `{name}`")))
    }

    pub fn list_tasks(&self, filter: &TaskFilter) -> Vec<TaskSummary> {
        self.corpus.read().expect("corpus poisoned").list_tasks(filter)
    }

    /// A stored version, or the latest when `version` is `None`.
    pub fn get_task(&self, task_id: &str, version: Option<u32>) -> Result<Arc<TaskRecord>, ServiceError> {
        let corpus = self.corpus.read().expect("corpus poisoned");
        Ok(match version {
            Some(v) => corpus.get(task_id, v)?.clone(),
            None => corpus.latest(task_id)?.clone(),
        })
    }

    pub fn task_count(&self) -> usize {
        self.corpus.read().expect("corpus poisoned").len()
    }

    pub fn embeddings(&self) -> Embeddings {
        self.embeddings.read().expect("embeddings poisoned").clone()
    }

    /// Cached t-SNE projection coloured by `basis`.
    pub fn overview(&self, dims: usize, basis: CategoryBasis) -> Result<OverviewPayload, ServiceError> {
        let mut cache = self.projections.lock().expect("projection cache poisoned");
        let entry = match cache.entry(dims) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(slot) => {
                let cfg = TsneConfig { dims, ..self.config.tsne.clone() };
                let points = project_tsne(&self.embeddings.read().expect("embeddings poisoned"), &cfg)?;
                slot.insert(ProjectionCache { points, incremental: Vec::new() })
            }
        };
        let corpus = self.corpus.read().expect("corpus poisoned");
        let points = entry
            .points
            .iter()
            .map(|p| {
                let category = corpus
                    .latest(&p.task_id)
                    .map(|t| t.category(basis).to_string())
                    .unwrap_or_default();
                ProjectionPoint { category, ..p.clone() }
            })
            .collect();
        Ok(OverviewPayload { dims, basis, points, incremental: entry.incremental.clone() })
    }

    /// Drops cached projections so the next overview runs t-SNE again.
    pub fn reproject(&self) {
        self.projections.lock().expect("projection cache poisoned").clear();
    }

    /// Validates, embeds and stores a modified task, then updates the
    /// embedding table and any cached projections. Nothing changes on error.
    pub(crate) fn commit_version(&self, record: TaskRecord) -> Result<Arc<TaskRecord>, ServiceError> {
        let task_id = record.task_id.clone();
        let mut corpus = self.corpus.write().expect("corpus poisoned");
        let next = corpus.versions(&task_id)?.len() as u32;
        record
            .validate(&format!("{task_id}@v{next}"))
            .map_err(ServiceError::Schema)?;
        let vector = self.provider.embed_one(&record)?;
        let version = corpus.save_version(&task_id, record)?;
        let stored = corpus.get(&task_id, version)?.clone();
        drop(corpus);

        let mut cache = self.projections.lock().expect("projection cache poisoned");
        let mut embeddings = self.embeddings.write().expect("embeddings poisoned");
        embeddings.insert(task_id.clone(), vector.clone());
        for entry in cache.values_mut() {
            let coords = place_incremental(&entry.points, &embeddings, &task_id, &vector, self.config.k)?;
            if let Some(p) = entry.points.iter_mut().find(|p| p.task_id == task_id) {
                p.coords = coords;
            }
            if !entry.incremental.contains(&task_id) {
                entry.incremental.push(task_id.clone());
            }
        }
        Ok(stored)
    }

    pub fn get_run(&self, run_id: &str) -> Result<EvalRun, ServiceError> {
        self.runs.get(run_id).ok_or_else(|| ServiceError::UnknownRun(run_id.to_string()))
    }

    /// Blocks until the run leaves PENDING/RUNNING or `timeout` passes.
    pub fn wait_for_run(&self, run_id: &str, timeout: std::time::Duration) -> Result<EvalRun, ServiceError> {
        let start = std::time::Instant::now();
        loop {
            let run = self.get_run(run_id)?;
            if run.status.is_terminal() || start.elapsed() >= timeout {
                return Ok(run);
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }

    pub fn runs(&self) -> &RunRegistry {
        &self.runs
    }
}

#[cfg(test)]
mod tests;
