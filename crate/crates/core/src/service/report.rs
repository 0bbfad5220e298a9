//! Headless metric and evaluation report.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::biasmetrics::{metric_report, write_report_csv, ComponentSelector, MetricKind};
use crate::corpus::{load_corpus, TaskFilter, TaskRecord};
use crate::evalharness::{evaluate_task, write_bins_csv, EvalConfig, EvalRun, ModelClient, RunStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

pub struct ReportOptions {
    pub corpus: PathBuf,
    pub filter: TaskFilter,
    /// Metric names as accepted by [`MetricKind::parse`].
    pub metrics: Vec<String>,
    pub component: ComponentSelector,
    pub output: PathBuf,
    /// When set, every selected task is evaluated and binned summaries are
    /// written to `beeswarm_output`.
    pub client: Option<Arc<dyn ModelClient>>,
    pub eval: EvalConfig,
    pub beeswarm_output: Option<PathBuf>,
    /// JSON-lines error log.
    pub error_log: Option<PathBuf>,
}

impl ReportOptions {
    pub fn new(corpus: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        ReportOptions {
            corpus: corpus.into(),
            filter: TaskFilter::default(),
            metrics: vec!["jaccard:word".to_string()],
            component: ComponentSelector::FullInstruction,
            output: output.into(),
            client: None,
            eval: EvalConfig::default(),
            beeswarm_output: None,
            error_log: None,
        }
    }

    /// `<output stem>.beeswarm.csv` next to the metric report by default.
    pub fn beeswarm_path(&self) -> PathBuf {
        self.beeswarm_output.clone().unwrap_or_else(|| {
            let stem = self.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            self.output.with_file_name(format!("{stem}.beeswarm.csv"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportError {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub exit_code: i32,
    pub tasks: usize,
    pub rows: usize,
    pub runs: Vec<EvalRun>,
    pub errors: Vec<ReportError>,
}

fn write_error_log(path: &Path, errors: &[ReportError]) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    for e in errors {
        writeln!(f, "{}", serde_json::to_string(e).expect("error record serializes"))?;
    }
    Ok(())
}

fn invalid(kind: &'static str, message: String) -> ReportOutcome {
    ReportOutcome {
        exit_code: EXIT_INVALID,
        tasks: 0,
        rows: 0,
        runs: Vec::new(),
        errors: vec![ReportError { kind, message }],
    }
}

fn run_report(opts: &ReportOptions) -> ReportOutcome {
    let metrics = match opts.metrics.iter().map(|m| MetricKind::parse(m)).collect::<Result<Vec<_>, _>>() {
        Ok(m) if !m.is_empty() => m,
        Ok(_) => return invalid("metrics", "no metrics requested".into()),
        Err(e) => return invalid("metrics", e.to_string()),
    };
    let loaded = match load_corpus(&opts.corpus) {
        Ok(r) => r,
        Err(e) => return invalid("corpus", e.to_string()),
    };
    let mut errors: Vec<ReportError> = loaded
        .errors
        .iter()
        .map(|e| ReportError { kind: "task_file", message: e.to_string() })
        .collect();
    if loaded.corpus.is_empty() {
        errors.push(ReportError { kind: "corpus", message: "no valid task files".into() });
        return ReportOutcome { exit_code: EXIT_INVALID, tasks: 0, rows: 0, runs: Vec::new(), errors };
    }
    let tasks: Vec<&TaskRecord> = loaded
        .corpus
        .current()
        .map(|t| t.as_ref())
        .filter(|t| opts.filter.matches(t))
        .collect();

    let rows = match metric_report(&tasks, &metrics, &opts.component) {
        Ok(r) => r,
        Err(e) => return invalid("metrics", e.to_string()),
    };
    let written = File::create(&opts.output)
        .map_err(|e| e.to_string())
        .and_then(|f| write_report_csv(&rows, f).map_err(|e| e.to_string()));
    if let Err(e) = written {
        return invalid("output", format!("{}: {e}", opts.output.display()));
    }

    let mut runs = Vec::new();
    if let Some(client) = &opts.client {
        for task in &tasks {
            match evaluate_task(task, client.as_ref(), &opts.eval) {
                Ok(run) => {
                    for e in &run.errors {
                        errors.push(ReportError {
                            kind: "instance",
                            message: format!("{}/{}: {}", run.task_id, e.instance_id, e.message),
                        });
                    }
                    runs.push(run);
                }
                Err(e) => errors.push(ReportError { kind: "eval", message: format!("{}: {e}", task.task_id) }),
            }
        }
        let path = opts.beeswarm_path();
        let refs: Vec<&EvalRun> = runs.iter().collect();
        let written = File::create(&path)
            .map_err(|e| e.to_string())
            .and_then(|f| write_bins_csv(&refs, f).map_err(|e| e.to_string()));
        if let Err(e) = written {
            return invalid("output", format!("{}: {e}", path.display()));
        }
    }

    let partial = !errors.is_empty() || runs.iter().any(|r| r.status != RunStatus::Done);
    ReportOutcome {
        exit_code: if partial { EXIT_PARTIAL } else { EXIT_OK },
        tasks: tasks.len(),
        rows: rows.len(),
        runs,
        errors,
    }
}

/// Writes the metric CSV (and the beeswarm CSV when a client is given).
/// Exit code 0 on success, 1 when some files, instances or runs failed,
/// 2 on invalid input.
pub fn cli_report(opts: &ReportOptions) -> ReportOutcome {
    let outcome = run_report(opts);
    if let Some(path) = &opts.error_log {
        if let Err(e) = write_error_log(path, &outcome.errors) {
            let mut failed = outcome;
            failed.errors.push(ReportError { kind: "error_log", message: format!("{}: {e}", path.display()) });
            failed.exit_code = failed.exit_code.max(EXIT_PARTIAL);
            return failed;
        }
    }
    outcome
}
