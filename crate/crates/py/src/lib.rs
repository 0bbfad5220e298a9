//! Python module `instructbias`.
//!
//! Structured results (session panels, runs, overviews) are returned as plain
//! Python dicts and lists decoded from their JSON form.

use std::sync::Arc;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use instructbias_core::biasmetrics::{self, ComponentSelector, ItemUnit, MetricKind};
use instructbias_core::corpus::{self, CategoryBasis, TaskCorpus, TaskFilter, TaskRecord};
use instructbias_core::embedspace::TfIdfProvider;
use instructbias_core::evalharness::{self, ConstantClient, EchoClient, EvalConfig, ModelClient, ReplayClient};
use instructbias_core::relations::ChordRelation;
use instructbias_core::service::{self, EngineConfig, ModifyRequest, ServiceError};
use instructbias_core::textproc::{self, Analyzer};

create_exception!(instructbias, InstructBiasError, PyException, "Analysis failed.");

fn err(e: impl std::fmt::Display) -> PyErr {
    InstructBiasError::new_err(e.to_string())
}

fn service_err(e: ServiceError) -> PyErr {
    match e {
        ServiceError::UnknownTask(_)
        | ServiceError::UnknownVersion { .. }
        | ServiceError::UnknownSession(_)
        | ServiceError::UnknownRun(_) => PyKeyError::new_err(e.to_string()),
        ServiceError::InvalidParameter(_) | ServiceError::Schema(_) => PyValueError::new_err(e.to_string()),
        e => err(e),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn unit(name: &str) -> PyResult<ItemUnit> {
    ItemUnit::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown unit `{name}`")))
}

fn component(name: &str) -> PyResult<ComponentSelector> {
    ComponentSelector::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown component `{name}`")))
}

fn metric(name: &str) -> PyResult<MetricKind> {
    MetricKind::parse(name).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn client(kind: &str, constant_text: &str, replay_file: Option<&str>) -> PyResult<Arc<dyn ModelClient>> {
    Ok(match kind {
        "echo" => Arc::new(EchoClient),
        "constant" => Arc::new(ConstantClient::new(constant_text)),
        "replay" => {
            let path = replay_file.ok_or_else(|| PyValueError::new_err("replay client needs replay_file"))?;
            Arc::new(ReplayClient::load(std::path::Path::new(path)).map_err(err)?)
        }
        other => return Err(PyValueError::new_err(format!("unknown client `{other}`"))),
    })
}

/// Lowercased alphanumeric tokens.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textproc::tokenize(text).into_inner()
}

/// Stemmed tokens with stop words removed.
#[pyfunction]
fn lemmas(text: &str) -> Vec<String> {
    Analyzer::english().content_lemmas(text)
}

#[pyfunction]
#[pyo3(signature = (a, b, unit = "word"))]
fn jaccard(a: &str, b: &str, unit: &str) -> PyResult<f64> {
    biasmetrics::jaccard(a, b, self::unit(unit)?, &Analyzer::english()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, unit = "word"))]
fn overlap(a: &str, b: &str, unit: &str) -> PyResult<f64> {
    biasmetrics::overlap(a, b, self::unit(unit)?, &Analyzer::english()).map_err(err)
}

#[pyfunction]
fn correlation(a: &str, b: &str) -> f64 {
    biasmetrics::component_correlation(a, b, &Analyzer::english())
}

#[pyfunction]
fn rouge_l(candidate: &str, references: Vec<String>) -> PyResult<f64> {
    evalharness::rouge_l(candidate, &references).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (similarity, bins = 20))]
fn bin_index(similarity: f64, bins: usize) -> PyResult<usize> {
    if bins == 0 {
        return Err(PyValueError::new_err("bins must be positive"));
    }
    Ok(biasmetrics::bin_index(similarity, bins))
}

/// One version of one task.
#[pyclass(frozen, module = "instructbias")]
struct Task {
    inner: Arc<TaskRecord>,
}

#[pymethods]
impl Task {
    /// Parses a task file body.
    #[staticmethod]
    #[pyo3(signature = (text, task_id = "task"))]
    fn from_json(text: &str, task_id: &str) -> PyResult<Task> {
        let record = TaskRecord::from_json(text.as_bytes(), "<string>", task_id).map_err(err)?;
        let record = corpus::cap_instances(record, corpus::INSTANCE_CAP);
        record.validate("<string>").map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Task { inner: Arc::new(record) })
    }

    #[getter]
    fn task_id(&self) -> &str {
        &self.inner.task_id
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn version(&self) -> u32 {
        self.inner.version
    }

    #[getter]
    fn task_type(&self) -> &str {
        self.inner.task_type()
    }

    #[getter]
    fn definition(&self) -> &str {
        &self.inner.definition
    }

    fn __len__(&self) -> usize {
        self.inner.instances.len()
    }

    fn __repr__(&self) -> String {
        format!("Task({:?}, version={}, instances={})", self.inner.task_id, self.inner.version, self.inner.instances.len())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Text of a component: `definition`, `positive_examples`, `instance:<id>`, ...
    fn component_text(&self, component: &str) -> PyResult<String> {
        biasmetrics::component_text(&self.inner, &self::component(component)?).map_err(err)
    }

    /// A per-task metric value; pairwise metrics are averaged over instances.
    #[pyo3(signature = (name, component = "full_instruction"))]
    fn metric(&self, name: &str, component: &str) -> PyResult<f64> {
        let value = biasmetrics::task_metric(&self.inner, metric(name)?, &self::component(component)?).map_err(err)?;
        Ok(value.value)
    }

    /// Instance-to-examples similarity for every instance, in stored order.
    fn instance_similarities(&self) -> Vec<f64> {
        biasmetrics::instance_similarities(&self.inner)
    }

    /// Runs the evaluation synchronously and returns the run as a dict.
    #[pyo3(signature = (client = "echo", limit = None, seed = 0, constant_text = "", replay_file = None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        client: &str,
        limit: Option<usize>,
        seed: u64,
        constant_text: &str,
        replay_file: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let client = self::client(client, constant_text, replay_file)?;
        let config = EvalConfig { seed, limit: limit.unwrap_or(corpus::INSTANCE_CAP), ..EvalConfig::default() };
        let task = self.inner.clone();
        let run = py.detach(move || evalharness::evaluate_task(&task, client.as_ref(), &config)).map_err(err)?;
        to_py(py, &run)
    }
}

/// A loaded set of tasks.
#[pyclass(module = "instructbias")]
struct Corpus {
    inner: TaskCorpus,
    #[pyo3(get)]
    errors: Vec<String>,
}

#[pymethods]
impl Corpus {
    /// Loads a task file or a directory of task files. Files that fail to
    /// validate are listed in `errors`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Corpus> {
        let report = corpus::load_corpus(std::path::Path::new(path)).map_err(err)?;
        Ok(Corpus { inner: report.corpus, errors: report.errors.iter().map(|e| e.to_string()).collect() })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn task_ids(&self) -> Vec<String> {
        self.inner.task_ids().map(str::to_string).collect()
    }

    #[pyo3(signature = (task_id, version = None))]
    fn get(&self, task_id: &str, version: Option<u32>) -> PyResult<Task> {
        let found = match version {
            Some(v) => self.inner.get(task_id, v),
            None => self.inner.latest(task_id),
        };
        found.map(|t| Task { inner: t.clone() }).map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    /// Task summaries matching every given filter.
    #[pyo3(signature = (task_type = None, domain = None, source = None, query = None))]
    fn list<'py>(
        &self,
        py: Python<'py>,
        task_type: Option<String>,
        domain: Option<String>,
        source: Option<String>,
        query: Option<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.list_tasks(&TaskFilter { task_type, domain, source, query }))
    }

    /// Writes the metric CSV report for every task.
    #[pyo3(signature = (path, metrics, component = "full_instruction"))]
    fn write_report(&self, path: &str, metrics: Vec<String>, component: &str) -> PyResult<usize> {
        let kinds = metrics.iter().map(|m| metric(m)).collect::<PyResult<Vec<_>>>()?;
        let tasks: Vec<&TaskRecord> = self.inner.current().map(|t| t.as_ref()).collect();
        let rows = biasmetrics::metric_report(&tasks, &kinds, &self::component(component)?).map_err(err)?;
        let file = std::fs::File::create(path).map_err(err)?;
        biasmetrics::write_report_csv(&rows, file).map_err(err)?;
        Ok(rows.len())
    }
}

/// The analysis engine behind the HTTP service, for in-process use.
#[pyclass(frozen, module = "instructbias")]
struct Engine {
    inner: Arc<service::Engine>,
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (corpus, seed = 0))]
    fn new(py: Python<'_>, corpus: &Corpus, seed: u64) -> PyResult<Engine> {
        let tasks = corpus.inner.clone();
        let engine = py
            .detach(move || service::Engine::new(tasks, Box::new(TfIdfProvider::new(seed)), EngineConfig::with_seed(seed)))
            .map_err(service_err)?;
        Ok(Engine { inner: Arc::new(engine) })
    }

    fn clients(&self) -> Vec<String> {
        self.inner.client_names()
    }

    #[pyo3(signature = (name, kind, constant_text = "", replay_file = None))]
    fn register_client(&self, name: &str, kind: &str, constant_text: &str, replay_file: Option<&str>) -> PyResult<()> {
        self.inner.register_client(name, client(kind, constant_text, replay_file)?);
        Ok(())
    }

    #[pyo3(signature = (task_id, version = None))]
    fn task(&self, task_id: &str, version: Option<u32>) -> PyResult<Task> {
        Ok(Task { inner: self.inner.get_task(task_id, version).map_err(service_err)? })
    }

    #[pyo3(signature = (dims = 2, basis = "task_type"))]
    fn overview<'py>(&self, py: Python<'py>, dims: usize, basis: &str) -> PyResult<Bound<'py, PyAny>> {
        let basis = CategoryBasis::parse(basis).ok_or_else(|| PyValueError::new_err(format!("unknown basis `{basis}`")))?;
        let engine = self.inner.clone();
        let o = py.detach(move || engine.overview(dims, basis)).map_err(service_err)?;
        to_py(py, &o)
    }

    #[pyo3(signature = (session, task_id, k = None))]
    fn set_root<'py>(&self, py: Python<'py>, session: &str, task_id: &str, k: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.set_root_with_k(session, task_id, k).map_err(service_err)?)
    }

    #[pyo3(signature = (session, threshold = None))]
    fn correlation<'py>(&self, py: Python<'py>, session: &str, threshold: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.correlation(session, threshold).map_err(service_err)?)
    }

    #[pyo3(signature = (session, relation = None, component = None, threshold = None))]
    fn chord<'py>(
        &self,
        py: Python<'py>,
        session: &str,
        relation: Option<&str>,
        component: Option<&str>,
        threshold: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let relation = relation
            .map(|r| ChordRelation::parse(r).ok_or_else(|| PyValueError::new_err(format!("unknown relation `{r}`"))))
            .transpose()?;
        let component = component.map(self::component).transpose()?;
        to_py(py, &self.inner.chord(session, relation, component, threshold).map_err(service_err)?)
    }

    #[pyo3(signature = (session, metrics = None, component = None))]
    fn metrics<'py>(
        &self,
        py: Python<'py>,
        session: &str,
        metrics: Option<Vec<String>>,
        component: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let metrics = metrics.map(|m| m.iter().map(|n| metric(n)).collect::<PyResult<Vec<_>>>()).transpose()?;
        let component = component.map(self::component).transpose()?;
        to_py(py, &self.inner.metrics(session, metrics, component).map_err(service_err)?)
    }

    fn beeswarm<'py>(&self, py: Python<'py>, session: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.beeswarm(session).map_err(service_err)?)
    }

    /// Saves a new version of a selected task and makes it the root. Returns
    /// the new version number.
    #[pyo3(signature = (session, task_id, definition = None))]
    fn modify(&self, session: &str, task_id: &str, definition: Option<String>) -> PyResult<u32> {
        let req = ModifyRequest { task_id: task_id.to_string(), definition, examples: None };
        Ok(self.inner.modify_instruction(session, &req).map_err(service_err)?.0)
    }

    /// Same as `modify`, with the full request as a JSON string (example edits included).
    fn modify_json(&self, session: &str, request: &str) -> PyResult<u32> {
        let req: ModifyRequest = serde_json::from_str(request).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(self.inner.modify_instruction(session, &req).map_err(service_err)?.0)
    }

    /// Starts a background evaluation run and returns its id.
    #[pyo3(signature = (session, task_id, limit = None, client = "echo"))]
    fn run_eval(&self, session: &str, task_id: &str, limit: Option<usize>, client: &str) -> PyResult<String> {
        Ok(self.inner.run_eval(session, task_id, limit, client).map_err(service_err)?.run_id)
    }

    fn get_run<'py>(&self, py: Python<'py>, run_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.get_run(run_id).map_err(service_err)?)
    }

    /// Blocks until the run finishes or `timeout` seconds pass.
    #[pyo3(signature = (run_id, timeout = 60.0))]
    fn wait<'py>(&self, py: Python<'py>, run_id: &str, timeout: f64) -> PyResult<Bound<'py, PyAny>> {
        let engine = self.inner.clone();
        let id = run_id.to_string();
        let wait = Duration::from_secs_f64(timeout.max(0.0));
        let run = py.detach(move || engine.wait_for_run(&id, wait)).map_err(service_err)?;
        to_py(py, &run)
    }
}

#[pymodule]
fn instructbias(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InstructBiasError", m.py().get_type::<InstructBiasError>())?;
    m.add("INSTANCE_CAP", corpus::INSTANCE_CAP)?;
    m.add_class::<Task>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(bin_index, m)?)?;
    Ok(())
}
