//! Prompting a model client over task instances, ROUGE-L scoring and
//! similarity-binned summaries.

mod client;
mod limiter;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasmetrics::{bin_means, instance_similarities, CompensatedSum};
use crate::corpus::{Example, Instance, TaskRecord, INSTANCE_CAP};
use crate::textproc::tokenize;

pub use client::{
    extract_instance_input, prompt_hash, ClientError, ClientLimits, ConstantClient, EchoClient, ModelClient,
    ReplayClient, ReplayRecord,
};
pub use limiter::TokenBucket;

/// Bin count of the evaluation summary.
pub const EVAL_BINS: usize = 20;
pub const DEFAULT_MAX_OUTPUT_TOKENS: usize = 128;
pub const DEFAULT_WORKERS: usize = 8;
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("at least one reference is required")]
    EmptyReferences,
    #[error("model client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("limit must be at least 1")]
    InvalidLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
    Partial,
}

impl RunStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, RunStatus::Done | RunStatus::Failed | RunStatus::Partial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub similarity: f64,
    pub score: f64,
    pub generation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceError {
    pub instance_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin_index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub run_id: String,
    pub task_id: String,
    pub version: u32,
    pub model: String,
    pub status: RunStatus,
    pub scores: Vec<InstanceScore>,
    pub bins: Vec<BinSummary>,
    pub overall: Option<f64>,
    pub errors: Vec<InstanceError>,
}

impl EvalRun {
    pub fn pending(run_id: &str, task: &TaskRecord, model: &str) -> EvalRun {
        EvalRun {
            run_id: run_id.to_string(),
            task_id: task.task_id.clone(),
            version: task.version,
            model: model.to_string(),
            status: RunStatus::Pending,
            scores: Vec::new(),
            bins: bin_results(&[]),
            overall: None,
            errors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub limit: usize,
    pub seed: u64,
    pub workers: usize,
    pub max_output_tokens: usize,
    /// First retry delay; doubles per attempt.
    pub backoff: Duration,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            limit: INSTANCE_CAP,
            seed: 0,
            workers: DEFAULT_WORKERS,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            backoff: Duration::from_millis(200),
        }
    }
}

fn push_examples(out: &mut String, label: &str, examples: &[Example]) {
    for (i, e) in examples.iter().enumerate() {
        out.push_str(&format!(
            "{label} Example {}\u{2014}\ninput: {}\noutput: {}\nexplanation: {}\n",
            i + 1,
            e.input,
            e.output,
            e.explanation
        ));
    }
}

/// Text-generation prompt for one instance. No escaping is applied.
pub fn assemble_prompt(task: &TaskRecord, instance: &Instance) -> String {
    let mut out = format!("Definition: {}\n", task.definition);
    push_examples(&mut out, "Positive", &task.positive_examples);
    push_examples(&mut out, "Negative", &task.negative_examples);
    out.push_str("Now complete the following example\u{2014}\ninput: ");
    out.push_str(&instance.input);
    out.push_str("\noutput:");
    out
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F1 of the LCS over token sequences.
pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L F1 against the best-matching reference.
pub fn rouge_l<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::EmptyReferences);
    }
    let cand = tokenize(candidate);
    Ok(references
        .iter()
        .map(|r| rouge_l_tokens(&cand, &tokenize(r.as_ref())))
        .fold(0.0, f64::max))
}

/// Cuts a completion at its first blank line and trims it.
pub fn postprocess_generation(raw: &str) -> String {
    let normalized = raw.replace("\r\n", "\n");
    let mut kept = Vec::new();
    let mut started = false;
    for line in normalized.split('\n') {
        if line.trim().is_empty() {
            if started {
                break;
            }
            continue;
        }
        started = true;
        kept.push(line);
    }
    kept.join("\n").trim().to_string()
}

/// Twenty equal-width similarity bins with per-bin mean score.
pub fn bin_results(scores: &[InstanceScore]) -> Vec<BinSummary> {
    let pairs: Vec<(f64, f64)> = scores.iter().map(|s| (s.similarity, s.score)).collect();
    let (counts, means) = bin_means(&pairs, EVAL_BINS);
    (0..EVAL_BINS)
        .map(|i| BinSummary {
            bin_index: i,
            lo: i as f64 / EVAL_BINS as f64,
            hi: (i + 1) as f64 / EVAL_BINS as f64,
            count: counts[i],
            mean_score: means[i],
        })
        .collect()
}

fn backoff_delay(config: &EvalConfig, attempt: usize, index: usize) -> Duration {
    // deterministic jitter in [0.5, 1.0) of the nominal delay
    let mix = config.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ attempt as u64;
    let frac = 0.5 + (mix.wrapping_mul(0xbf58_476d_1ce4_e5b9) >> 11) as f64 / (1u64 << 53) as f64 / 2.0;
    config.backoff.mul_f64(frac * (1u64 << attempt) as f64)
}

fn evaluate_one(
    task: &TaskRecord,
    instance: &Instance,
    similarity: f64,
    index: usize,
    client: &dyn ModelClient,
    limiter: &TokenBucket,
    config: &EvalConfig,
) -> Result<InstanceScore, String> {
    let prompt = assemble_prompt(task, instance);
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            thread::sleep(backoff_delay(config, attempt - 1, index));
        }
        limiter.acquire();
        match client.complete(&prompt, config.max_output_tokens) {
            Ok(raw) => {
                let generation = postprocess_generation(&raw);
                let score = rouge_l(&generation, &instance.outputs).map_err(|e| e.to_string())?;
                return Ok(InstanceScore { instance_id: instance.instance_id.clone(), similarity, score, generation });
            }
            Err(ClientError::Unavailable(msg)) => return Err(format!("client unavailable: {msg}")),
            Err(e) => last = e.to_string(),
        }
    }
    Err(format!("failed after {MAX_ATTEMPTS} attempts: {last}"))
}

/// Scores the first `config.limit` instances of `task` in stored order.
///
/// Instances that still fail after retries are listed in `errors` and the
/// run is `Partial`; if none succeed it is `Failed`. `progress` is called
/// with the number of finished instances.
pub fn evaluate_task_with_progress(
    task: &TaskRecord,
    client: &dyn ModelClient,
    config: &EvalConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<EvalRun, EvalError> {
    if config.limit == 0 {
        return Err(EvalError::InvalidLimit);
    }
    client
        .check_available()
        .map_err(|e| EvalError::ClientUnavailable(e.to_string()))?;
    let n = config.limit.min(task.instances.len());
    let instances = &task.instances[..n];
    let similarities = instance_similarities(task);
    let limits = client.limits();
    let limiter = TokenBucket::new(limits.requests_per_minute, limits.max_concurrent.max(1));
    let width = config.workers.min(limits.max_concurrent).clamp(1, n.max(1));

    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<InstanceScore, String>>>> = Mutex::new(vec![None; n]);
    thread::scope(|s| {
        for _ in 0..width {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = evaluate_one(task, &instances[i], similarities[i], i, client, &limiter, config);
                results.lock().expect("result slots poisoned")[i] = Some(r);
                progress(done.fetch_add(1, Ordering::SeqCst) + 1);
            });
        }
    });

    let mut scores = Vec::with_capacity(n);
    let mut errors = Vec::new();
    for (inst, r) in instances.iter().zip(results.into_inner().expect("result slots poisoned")) {
        match r.expect("every slot is filled") {
            Ok(s) => scores.push(s),
            Err(message) => errors.push(InstanceError { instance_id: inst.instance_id.clone(), message }),
        }
    }
    let status = match (scores.is_empty(), errors.is_empty()) {
        (_, true) => RunStatus::Done,
        (true, false) => RunStatus::Failed,
        (false, false) => RunStatus::Partial,
    };
    let overall = (!scores.is_empty())
        .then(|| scores.iter().map(|s| s.score).collect::<CompensatedSum>().total() / scores.len() as f64);
    Ok(EvalRun {
        run_id: String::new(),
        task_id: task.task_id.clone(),
        version: task.version,
        model: client.name().to_string(),
        status,
        bins: bin_results(&scores),
        scores,
        overall,
        errors,
    })
}

pub fn evaluate_task(task: &TaskRecord, client: &dyn ModelClient, config: &EvalConfig) -> Result<EvalRun, EvalError> {
    evaluate_task_with_progress(task, client, config, &|_| {})
}

/// Replay records reproducing `run` offline.
pub fn replay_records(task: &TaskRecord, run: &EvalRun) -> Vec<ReplayRecord> {
    run.scores
        .iter()
        .filter_map(|s| {
            let inst = task.instance(&s.instance_id)?;
            Some(ReplayRecord {
                instance_id: s.instance_id.clone(),
                prompt_hash: prompt_hash(&assemble_prompt(task, inst)),
                generation: s.generation.clone(),
            })
        })
        .collect()
}

/// Beeswarm summary CSV: one row per bin per run.
pub fn write_bins_csv<W: Write>(runs: &[&EvalRun], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["task_id", "version", "model", "bin_index", "lo", "hi", "count", "mean_score"])?;
    for run in runs {
        for b in &run.bins {
            writer.write_record([
                run.task_id.clone(),
                run.version.to_string(),
                run.model.clone(),
                b.bin_index.to_string(),
                format!("{:.2}", b.lo),
                format!("{:.2}", b.hi),
                b.count.to_string(),
                b.mean_score.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
