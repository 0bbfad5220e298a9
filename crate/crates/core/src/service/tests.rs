use super::*;
use crate::biasmetrics::{ComponentSelector, ItemUnit, MetricKind};
use crate::corpus::Example;
use crate::embedspace::TfIdfProvider;
use crate::evalharness::{ClientError, ConstantClient, ReplayClient, RunStatus};
use crate::fixtures::{example, synthetic_corpus};
use crate::relations::ChordRelation;
use std::time::Duration;

fn engine(n: usize, instances: usize) -> Engine {
    let corpus = synthetic_corpus(n, instances, 5);
    let config = EngineConfig {
        eval: EvalConfig { backoff: Duration::from_millis(1), ..EvalConfig::default() },
        ..EngineConfig::with_seed(5)
    };
    Engine::new(corpus, Box::new(TfIdfProvider::new(5)), config).unwrap()
}

const WAIT: Duration = Duration::from_secs(20);

#[test]
fn set_root_selects_nine_neighbors() {
    let e = engine(12, 5);
    let s = e.set_root("s1", "task003").unwrap();
    assert_eq!(s.root.task_id, "task003");
    assert_eq!(s.ranking.neighbors.len(), 9);
    assert_eq!(s.selection()[0], "task003");
    assert_eq!(s.label_of("task003").as_deref(), Some("T1"));
    let g1 = e.correlation("s1", None).unwrap();
    let again = e.set_root("s1", "task003").unwrap();
    assert_eq!(again.ranking, s.ranking);
    assert_eq!(e.correlation("s1", None).unwrap(), g1);
    assert_eq!(g1.root.task_id, "task003");
    assert_eq!(g1.body.nodes.len(), 10);
}

#[test]
fn unknown_root_leaves_session_unchanged() {
    let e = engine(12, 2);
    let before = e.set_root("s", "task001").unwrap();
    assert!(matches!(e.set_root("s", "nope"), Err(ServiceError::UnknownTask(_))));
    assert_eq!(e.session("s").unwrap(), before);
    assert!(matches!(e.set_root("fresh", "nope"), Err(ServiceError::UnknownTask(_))));
    assert!(matches!(e.session("fresh"), Err(ServiceError::UnknownSession(_))));
}

#[test]
fn small_corpus_reports_too_small() {
    let e = engine(6, 1);
    assert!(matches!(e.set_root("s", "task000"), Err(ServiceError::Embed(_))));
    let s = e.set_root_with_k("s", "task000", Some(3)).unwrap();
    assert_eq!(s.ranking.neighbors.len(), 3);
}

#[test]
fn modify_makes_new_root_and_recomputes() {
    let e = engine(12, 4);
    e.set_root("s", "task000").unwrap();
    let before = e.metrics("s", Some(vec![MetricKind::SampleLength]), Some(ComponentSelector::PositiveExamples)).unwrap();
    let req = ModifyRequest {
        task_id: "task000".into(),
        definition: None,
        examples: Some(ExampleEdits {
            replace: vec![ExampleReplacement {
                set: ExampleSet::Positive,
                index: 0,
                example: example("one two three four five six seven eight nine ten", "eleven", "twelve"),
            }],
            ..ExampleEdits::default()
        }),
    };
    let (version, state) = e.modify_instruction("s", &req).unwrap();
    assert_eq!(version, 1);
    assert_eq!(state.root, session::RootStamp { task_id: "task000".into(), version: 1 });
    let after = e.metrics("s", None, None).unwrap();
    assert_eq!(after.root.version, 1);
    assert_ne!(after.body.tasks[0].values[0].value, before.body.tasks[0].values[0].value);
    assert_eq!(e.get_task("task000", None).unwrap().positive_examples[0].output, "eleven");
    assert_eq!(e.get_task("task000", Some(0)).unwrap().version, 0);
    for payload_root in [
        e.correlation("s", None).unwrap().root,
        e.chord("s", None, None, None).unwrap().root,
        e.beeswarm("s").unwrap().root,
    ] {
        assert_eq!(payload_root.version, 1);
    }
}

#[test]
fn failed_modify_is_atomic() {
    let e = engine(12, 2);
    let before = e.set_root("s", "task002").unwrap();
    let bad = ModifyRequest { task_id: "task002".into(), definition: Some("   ".into()), examples: None };
    assert!(matches!(e.modify_instruction("s", &bad), Err(ServiceError::Schema(_))));
    let out_of_range = ModifyRequest {
        task_id: "task002".into(),
        definition: None,
        examples: Some(ExampleEdits {
            replace: vec![ExampleReplacement { set: ExampleSet::Negative, index: 9, example: example("a", "b", "") }],
            ..ExampleEdits::default()
        }),
    };
    assert!(matches!(e.modify_instruction("s", &out_of_range), Err(ServiceError::InvalidParameter(_))));
    assert_eq!(e.session("s").unwrap(), before);
    assert_eq!(e.get_task("task002", None).unwrap().version, 0);
    let not_selected: Vec<String> = (0..12).map(|i| format!("task{i:03}")).filter(|t| !before.selection().contains(t)).collect();
    let req = ModifyRequest { task_id: not_selected[0].clone(), definition: Some("New.".into()), examples: None };
    assert!(matches!(e.modify_instruction("s", &req), Err(ServiceError::NotInSelection(_))));
}

struct Slow;

impl ModelClient for Slow {
    fn name(&self) -> &str {
        "slow"
    }

    fn complete(&self, prompt: &str, _: usize) -> Result<String, ClientError> {
        std::thread::sleep(Duration::from_millis(100));
        Ok(crate::evalharness::extract_instance_input(prompt).unwrap_or_default().to_string())
    }
}

#[test]
fn eval_runs_and_retention() {
    let e = engine(12, 60);
    e.register_client("slow", Arc::new(Slow));
    e.set_root("s", "task001").unwrap();
    let run = e.run_eval("s", "task001", Some(50), "echo").unwrap();
    let done = e.wait_for_run(&run.run_id, WAIT).unwrap();
    assert_eq!(done.status, RunStatus::Done);
    assert_eq!(done.scores.len(), 50);
    assert_eq!(done.overall, Some(1.0));
    let bees = e.beeswarm("s").unwrap();
    assert_eq!(bees.body.columns[0].run_id.as_deref(), Some(run.run_id.as_str()));
    assert_eq!(bees.body.columns[0].bins.iter().map(|b| b.count).sum::<usize>(), 50);

    let slow = e.run_eval("s", "task001", Some(20), "slow").unwrap();
    assert_eq!(slow.status, RunStatus::Running);
    assert!(matches!(
        e.run_eval("s", "task001", Some(20), "echo"),
        Err(ServiceError::ConcurrentRunExists { .. })
    ));
    e.wait_for_run(&slow.run_id, WAIT).unwrap();

    let req = ModifyRequest { task_id: "task001".into(), definition: Some("Something else entirely.".into()), examples: None };
    e.modify_instruction("s", &req).unwrap();
    let old = e.get_run(&run.run_id).unwrap();
    assert_eq!(old.version, 0);
    assert_eq!(old.status, RunStatus::Done);
    assert!(e.beeswarm("s").unwrap().body.columns[0].run_id.is_none());
    assert!(matches!(e.run_eval("s", "task001", Some(1), "missing"), Err(ServiceError::ClientUnavailable(_))));
    assert!(matches!(e.get_run("run-999999"), Err(ServiceError::UnknownRun(_))));
}

#[test]
fn chord_and_metrics_payloads() {
    let e = engine(12, 3);
    e.set_root("s", "task004").unwrap();
    let chord = e
        .chord("s", Some(ChordRelation::NormWordOverlap), Some(ComponentSelector::PositiveExamples), Some(0.6))
        .unwrap();
    assert_eq!(chord.body.values.len(), 10);
    assert_eq!(chord.body.threshold, 0.6);
    assert_eq!(e.session("s").unwrap().chord_threshold, 0.6);
    assert!(matches!(e.chord("s", None, None, Some(2.0)), Err(ServiceError::InvalidParameter(_))));
    let metrics = e
        .metrics("s", Some(vec![MetricKind::Jaccard(ItemUnit::Word), MetricKind::UniqueVocab]), None)
        .unwrap();
    assert_eq!(metrics.body.tasks.len(), 10);
    assert_eq!(metrics.body.tasks[0].heat.len(), 1);
    assert_eq!(metrics.body.tasks[0].heat[0].row.counts.iter().sum::<usize>(), 3);
}

#[test]
fn overview_and_incremental_placement() {
    let e = engine(12, 1);
    let o = e.overview(2, CategoryBasis::TaskType).unwrap();
    assert_eq!(o.points.len(), 12);
    assert!(o.points.iter().all(|p| !p.category.is_empty()));
    e.set_root("s", "task000").unwrap();
    let req = ModifyRequest {
        task_id: "task000".into(),
        definition: None,
        examples: Some(ExampleEdits {
            positive: Some(vec![Example { input: "new".into(), output: "words".into(), explanation: String::new() }]),
            ..ExampleEdits::default()
        }),
    };
    e.modify_instruction("s", &req).unwrap();
    let o2 = e.overview(2, CategoryBasis::TaskType).unwrap();
    assert_eq!(o2.incremental, vec!["task000".to_string()]);
    assert_eq!(o2.points.len(), 12);
    e.reproject();
    assert!(e.overview(2, CategoryBasis::Domain).unwrap().incremental.is_empty());
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    synthetic_corpus(3, 4, 1).write_current(&corpus_dir).unwrap();
    let out = dir.path().join("metrics.csv");
    let mut opts = ReportOptions::new(&corpus_dir, &out);
    opts.error_log = Some(dir.path().join("errors.jsonl"));
    let outcome = cli_report(&opts);
    assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.errors);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + outcome.rows);
    assert!(outcome.rows >= 3);

    let bad = cli_report(&ReportOptions::new(dir.path().join("missing"), &out));
    assert_eq!(bad.exit_code, EXIT_INVALID);
    let mut bad_metric = ReportOptions::new(&corpus_dir, &out);
    bad_metric.metrics = vec!["nonsense".into()];
    assert_eq!(cli_report(&bad_metric).exit_code, EXIT_INVALID);

    std::fs::write(corpus_dir.join("zzz_broken.json"), "{").unwrap();
    let partial = cli_report(&opts);
    assert_eq!(partial.exit_code, EXIT_PARTIAL);
    let log = std::fs::read_to_string(dir.path().join("errors.jsonl")).unwrap();
    assert!(log.contains("zzz_broken"));
}

#[test]
fn replay_report_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    let corpus = synthetic_corpus(3, 6, 2);
    corpus.write_current(&corpus_dir).unwrap();
    let mut records = Vec::new();
    for t in corpus.current() {
        let run = crate::evalharness::evaluate_task(t, &ConstantClient::new("man park river"), &EvalConfig::default()).unwrap();
        records.extend(crate::evalharness::replay_records(t, &run));
    }
    let replay: Arc<dyn ModelClient> = Arc::new(ReplayClient::new(records));
    let run_once = |name: &str| {
        let mut opts = ReportOptions::new(&corpus_dir, dir.path().join(format!("{name}.csv")));
        opts.client = Some(replay.clone());
        let outcome = cli_report(&opts);
        assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.errors);
        std::fs::read_to_string(opts.beeswarm_path()).unwrap()
    };
    let a = run_once("a");
    assert_eq!(a, run_once("b"));
    assert_eq!(a.lines().count(), 1 + 3 * 20);
}
