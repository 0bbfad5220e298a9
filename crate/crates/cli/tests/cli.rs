use std::path::Path;
use std::process::{Command, Output};

use instructbias_core::fixtures::synthetic_corpus;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_instructbias"));
    cmd.env_remove("INSTRUCTBIAS_API_TOKEN").env_remove("INSTRUCTBIAS_REMOTE_URL");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn corpus(dir: &Path) -> String {
    let path = dir.join("corpus");
    synthetic_corpus(4, 5, 9).write_current(&path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ingest_summarizes_and_flags_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = run(&["ingest", "--corpus", &c]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["tasks"], 4);
    assert_eq!(summary["instances"], 20);

    std::fs::write(Path::new(&c).join("broken.json"), "[1, 2").unwrap();
    let out = run(&["ingest", "--corpus", &c]);
    assert_eq!(code(&out), 1);

    let copy = dir.path().join("copy");
    let out = run(&["ingest", "--corpus", &c, "--out", copy.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(std::fs::read_dir(&copy).unwrap().count(), 4);

    assert_eq!(code(&run(&["ingest", "--corpus", dir.path().join("none").to_str().unwrap()])), 2);
}

#[test]
fn report_writes_csv_and_beeswarm() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let output = dir.path().join("metrics.csv");
    let out = run(&[
        "report",
        "--corpus",
        &c,
        "--output",
        output.to_str().unwrap(),
        "--metrics",
        "sample_length,jaccard:word",
        "--client",
        "echo",
        "--limit",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&output).unwrap();
    assert!(csv.starts_with("task_id,version,metric,unit,component,bin_index,value,count"));
    let bees = std::fs::read_to_string(dir.path().join("metrics.beeswarm.csv")).unwrap();
    assert_eq!(bees.lines().count(), 1 + 4 * 20);

    let bad = run(&["report", "--corpus", &c, "--output", output.to_str().unwrap(), "--metrics", "nonsense"]);
    assert_eq!(code(&bad), 2);
    let bad = run(&["report", "--corpus", &c, "--output", output.to_str().unwrap(), "--component", "preface"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn eval_records_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let record = dir.path().join("gen.jsonl");
    let first = dir.path().join("first.json");
    let out = run(&[
        "--seed",
        "4",
        "eval",
        "--corpus",
        &c,
        "--task",
        "task001",
        "--client",
        "constant",
        "--constant-text",
        "a man in the park",
        "--output",
        first.to_str().unwrap(),
        "--record",
        record.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&record).unwrap().lines().count(), 5);

    let replayed = dir.path().join("replayed.json");
    let bins = dir.path().join("bins.csv");
    let out = run(&[
        "--seed",
        "4",
        "eval",
        "--corpus",
        &c,
        "--task",
        "task001",
        "--client",
        "replay",
        "--replay-file",
        record.to_str().unwrap(),
        "--output",
        replayed.to_str().unwrap(),
        "--bins",
        bins.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&replayed).unwrap()).unwrap();
    assert_eq!(a[0]["scores"], b[0]["scores"]);
    assert_eq!(std::fs::read_to_string(&bins).unwrap().lines().count(), 21);

    // other tasks were never recorded
    let out = run(&["eval", "--corpus", &c, "--task", "task002", "--client", "replay", "--replay-file", record.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let runs: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(runs[0]["status"], "FAILED");

    assert_eq!(code(&run(&["eval", "--corpus", &c, "--task", "ghost"])), 2);
    assert_eq!(code(&run(&["eval", "--corpus", &c, "--limit", "0"])), 2);
    assert_eq!(code(&run(&["eval", "--corpus", &c, "--client", "replay"])), 2);
}

#[test]
fn remote_client_needs_token() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = run(&["eval", "--corpus", &c, "--task", "task000", "--client", "remote", "--remote-url", "http://127.0.0.1:9"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("INSTRUCTBIAS_API_TOKEN"));
}

#[test]
fn serve_rejects_unusable_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["serve", "--corpus", dir.path().to_str().unwrap()])), 2);
    let c = corpus(dir.path());
    assert_eq!(code(&run(&["serve", "--corpus", &c, "--addr", "not-an-address"])), 2);
}

#[test]
fn unknown_subcommand_is_invalid() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

struct Server {
    child: std::process::Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(corpus: &str, versions: &Path) -> Server {
    use std::io::{BufRead, BufReader};
    let mut child = bin()
        .args(["serve", "--corpus", corpus, "--addr", "127.0.0.1:0", "--versions", versions.to_str().unwrap()])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let base = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(url) = line.strip_prefix("listening on ") {
            break url.to_string();
        }
    };
    Server { child, base }
}

fn http_json(method: &str, url: &str, body: Option<serde_json::Value>) -> serde_json::Value {
    let agent = ureq::Agent::new_with_defaults();
    let mut resp = match body {
        Some(b) if method == "POST" => agent.post(url).send_json(b).unwrap(),
        _ => agent.get(url).call().unwrap(),
    };
    resp.body_mut().read_json().unwrap()
}

#[test]
fn serve_persists_modified_versions() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let versions = dir.path().join("versions");
    {
        let server = start_server(&c, &versions);
        let tasks = http_json("GET", &format!("{}/tasks", server.base), None);
        assert_eq!(tasks.as_array().unwrap().len(), 4);
        let root = serde_json::json!({"task_id": "task000", "k": 3});
        http_json("POST", &format!("{}/session/x/root", server.base), Some(root));
        let edit = serde_json::json!({"task_id": "task000", "definition": "A rewritten definition."});
        let modified = http_json("POST", &format!("{}/session/x/modify", server.base), Some(edit));
        assert_eq!(modified["version"], 1);
    }
    let server = start_server(&c, &versions);
    let task = http_json("GET", &format!("{}/tasks/task000", server.base), None);
    assert_eq!(task["version"], 1);
    assert_eq!(task["definition"], "A rewritten definition.");
    let original = http_json("GET", &format!("{}/tasks/task000?version=0", server.base), None);
    assert_ne!(original["definition"], "A rewritten definition.");
}
