use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use instructbias_cli::{http, ClientArgs, ClientKind};
use instructbias_core::biasmetrics::ComponentSelector;
use instructbias_core::corpus::{load_corpus, TaskCorpus, TaskFilter, TaskSummary};
use instructbias_core::embedspace::{EmbeddingProvider, ExternalProvider, TfIdfProvider};
use instructbias_core::evalharness::{
    evaluate_task, replay_records, write_bins_csv, EvalConfig, EvalRun, ReplayClient, RunStatus,
};
use instructbias_core::service::{cli_report, Engine, EngineConfig, ReportOptions, EXIT_INVALID, EXIT_OK, EXIT_PARTIAL};

#[derive(Parser)]
#[command(name = "instructbias", version, about = "Instruction-bias analysis: metrics, evaluation and the analysis service")]
struct Cli {
    /// Seed for projections, embeddings and retry jitter.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print a summary.
    Ingest(IngestArgs),
    /// Write the metric CSV, plus binned evaluation summaries when a client is given.
    Report(ReportArgs),
    /// Evaluate tasks with a model client.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long = "type")]
    task_type: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    source: Option<String>,
    /// Substring search over name and definition.
    #[arg(long)]
    query: Option<String>,
}

impl FilterArgs {
    fn filter(&self) -> TaskFilter {
        TaskFilter {
            task_type: self.task_type.clone(),
            domain: self.domain.clone(),
            source: self.source.clone(),
            query: self.query.clone(),
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Task file or directory of task files.
    #[arg(long)]
    corpus: PathBuf,
    /// Write the validated (capped) tasks here as canonical task files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print one summary line per task.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated metric names, e.g. `jaccard:word,unique_vocab,ngram_freq:2`.
    #[arg(long, value_delimiter = ',', default_value = "jaccard:word")]
    metrics: Vec<String>,
    #[arg(long, default_value = "full_instruction")]
    component: String,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    client: ClientArgs,
    #[arg(long)]
    limit: Option<usize>,
    /// Defaults to `<output stem>.beeswarm.csv`.
    #[arg(long)]
    beeswarm_output: Option<PathBuf>,
    /// JSON-lines error log.
    #[arg(long)]
    error_log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Task to evaluate; repeat for several. Defaults to every task.
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[command(flatten)]
    client: ClientArgs,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Runs as JSON; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Binned summaries as CSV.
    #[arg(long)]
    bins: Option<PathBuf>,
    /// Save generations as a replay file.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Directory where modified task versions are saved and restored from.
    #[arg(long)]
    versions: Option<PathBuf>,
    /// Precomputed embedding file; the built-in TF-IDF projection is used otherwise.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Default instance limit for evaluation runs.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    client: ClientArgs,
}

#[derive(Serialize)]
struct IngestSummary {
    tasks: usize,
    instances: usize,
    errors: Vec<String>,
}

fn load(path: &Path) -> Result<(TaskCorpus, Vec<String>)> {
    let report = load_corpus(path).with_context(|| format!("cannot read corpus {}", path.display()))?;
    Ok((report.corpus, report.errors.iter().map(|e| e.to_string()).collect()))
}

fn ingest(args: &IngestArgs) -> Result<u8> {
    let (corpus, errors) = load(&args.corpus)?;
    if let Some(out) = &args.out {
        corpus.write_current(out)?;
    }
    if args.list {
        let rows: Vec<TaskSummary> = corpus.list_tasks(&TaskFilter::default());
        for row in rows {
            println!("{}", serde_json::to_string(&row)?);
        }
    }
    let summary = IngestSummary {
        tasks: corpus.len(),
        instances: corpus.current().map(|t| t.instances.len()).sum(),
        errors,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(if summary.tasks == 0 {
        EXIT_INVALID as u8
    } else if summary.errors.is_empty() {
        EXIT_OK as u8
    } else {
        EXIT_PARTIAL as u8
    })
}

fn eval_config(seed: u64, limit: Option<usize>) -> Result<EvalConfig> {
    let config = EvalConfig { seed, limit: limit.unwrap_or(EvalConfig::default().limit), ..EvalConfig::default() };
    if config.limit == 0 {
        bail!("--limit must be at least 1");
    }
    Ok(config)
}

fn report(seed: u64, args: &ReportArgs) -> Result<u8> {
    let component = ComponentSelector::parse(&args.component)
        .with_context(|| format!("unknown component `{}`", args.component))?;
    let mut opts = ReportOptions::new(&args.corpus, &args.output);
    opts.filter = args.filter.filter();
    opts.metrics = args.metrics.clone();
    opts.component = component;
    opts.client = args.client.selected()?;
    opts.eval = eval_config(seed, args.limit)?;
    opts.beeswarm_output = args.beeswarm_output.clone();
    opts.error_log = args.error_log.clone();
    let outcome = cli_report(&opts);
    for e in &outcome.errors {
        eprintln!("{}: {}", e.kind, e.message);
    }
    eprintln!("{} tasks, {} rows, {} runs", outcome.tasks, outcome.rows, outcome.runs.len());
    Ok(outcome.exit_code as u8)
}

fn eval(seed: u64, args: &EvalArgs) -> Result<u8> {
    let (corpus, load_errors) = load(&args.corpus)?;
    for e in &load_errors {
        eprintln!("task_file: {e}");
    }
    let client = args.client.build(args.client.client.unwrap_or(ClientKind::Echo))?;
    let mut config = eval_config(seed, args.limit)?;
    if let Some(w) = args.workers {
        config.workers = w.max(1);
    }
    let tasks = if args.tasks.is_empty() {
        corpus.current().cloned().collect::<Vec<_>>()
    } else {
        args.tasks
            .iter()
            .map(|id| corpus.latest(id).cloned())
            .collect::<Result<Vec<_>, _>>()?
    };
    if tasks.is_empty() {
        bail!("no tasks to evaluate");
    }
    let mut runs: Vec<EvalRun> = Vec::new();
    let mut records = Vec::new();
    for task in &tasks {
        let run = evaluate_task(task, client.as_ref(), &config)?;
        eprintln!("{} v{}: {:?} overall={:?}", run.task_id, run.version, run.status, run.overall);
        records.extend(replay_records(task, &run));
        runs.push(run);
    }
    let json = serde_json::to_string_pretty(&runs)?;
    match &args.output {
        Some(path) => std::fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.bins {
        let refs: Vec<&EvalRun> = runs.iter().collect();
        write_bins_csv(&refs, File::create(path).with_context(|| format!("cannot write {}", path.display()))?)?;
    }
    if let Some(path) = &args.record {
        File::create(path)
            .and_then(|mut f| f.write_all(ReplayClient::to_jsonl(&records).as_bytes()))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let clean = load_errors.is_empty() && runs.iter().all(|r| r.status == RunStatus::Done);
    Ok(if clean { EXIT_OK as u8 } else { EXIT_PARTIAL as u8 })
}

fn serve(seed: u64, args: &ServeArgs) -> Result<u8> {
    let (mut corpus, errors) = load(&args.corpus)?;
    for e in &errors {
        eprintln!("task_file: {e}");
    }
    if corpus.is_empty() {
        bail!("no valid task files in {}", args.corpus.display());
    }
    if let Some(dir) = &args.versions {
        let restored = corpus.attach_version_dir(dir)?;
        eprintln!("restored {restored} saved versions from {}", dir.display());
    }
    let provider: Box<dyn EmbeddingProvider> = match &args.embeddings {
        Some(path) => Box::new(ExternalProvider::load(path)?),
        None => Box::new(TfIdfProvider::new(seed)),
    };
    let mut config = EngineConfig::with_seed(seed);
    config.eval = eval_config(seed, args.limit)?;
    let engine = Engine::new(corpus, provider, config)?;
    if let Some(client) = args.client.selected()? {
        let name = client.name().to_string();
        engine.register_client(&name, client);
    }
    let app = http::router(Arc::new(engine));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    Ok(EXIT_OK as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Report(a) => report(cli.seed, a),
        Command::Eval(a) => eval(cli.seed, a),
        Command::Serve(a) => serve(cli.seed, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
