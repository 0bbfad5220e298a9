//! Task records, loading and validation, instance capping, and the
//! append-only version store.

mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::textproc::Language;

/// Upper bound on instances kept per task.
pub const INSTANCE_CAP: usize = 6500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{file}: parse error: {reason}")]
    Parse { file: String, reason: String },
    #[error("{file}: schema error in `{field}`: {reason}")]
    Schema {
        file: String,
        field: String,
        reason: String,
    },
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{task_id}` has no version {version}")]
    UnknownVersion { task_id: String, version: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub input: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Languages {
    pub input: Vec<String>,
    pub output: Vec<String>,
    pub instruction: Vec<String>,
}

/// One task at one version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub name: String,
    pub sources: Vec<String>,
    pub categories: Vec<String>,
    pub domains: Vec<String>,
    pub languages: Languages,
    pub definition: String,
    pub positive_examples: Vec<Example>,
    pub negative_examples: Vec<Example>,
    pub instances: Vec<Instance>,
    pub version: u32,
    /// Fields the schema does not know about, preserved as loaded.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

fn first(v: &[String]) -> &str {
    v.first().map(String::as_str).unwrap_or("")
}

impl TaskRecord {
    /// First listed category.
    pub fn task_type(&self) -> &str {
        first(&self.categories)
    }

    pub fn domain(&self) -> &str {
        first(&self.domains)
    }

    pub fn source_dataset(&self) -> &str {
        first(&self.sources)
    }

    pub fn category(&self, basis: CategoryBasis) -> &str {
        match basis {
            CategoryBasis::TaskType => self.task_type(),
            CategoryBasis::Domain => self.domain(),
            CategoryBasis::SourceDataset => self.source_dataset(),
        }
    }

    /// Processing language: instruction language, then input language,
    /// defaulting to English.
    pub fn language(&self) -> Language {
        self.languages
            .instruction
            .first()
            .or_else(|| self.languages.input.first())
            .map(|l| Language::from_code(l))
            .unwrap_or_default()
    }

    pub fn instance(&self, instance_id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.instance_id == instance_id)
    }

    pub fn summary(&self) -> TaskSummary {
        TaskSummary {
            task_id: self.task_id.clone(),
            name: self.name.clone(),
            task_type: self.task_type().to_string(),
            domain: self.domain().to_string(),
            source_dataset: self.source_dataset().to_string(),
            version: self.version,
        }
    }

    /// Checks every record invariant. `file` labels the error.
    pub fn validate(&self, file: &str) -> Result<(), CorpusError> {
        let fail = |field: &str, reason: &str| {
            Err(CorpusError::Schema {
                file: file.to_string(),
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.task_id.trim().is_empty() {
            return fail("id", "must be non-empty");
        }
        if self.definition.trim().is_empty() {
            return fail("Definition", "must be non-empty");
        }
        if self.positive_examples.is_empty() {
            return fail("Positive Examples", "at least one positive example is required");
        }
        for (field, examples) in [
            ("Positive Examples", &self.positive_examples),
            ("Negative Examples", &self.negative_examples),
        ] {
            for ex in examples.iter() {
                if ex.input.trim().is_empty() {
                    return fail(&format!("{field}.input"), "must be non-empty");
                }
                if ex.output.trim().is_empty() {
                    return fail(&format!("{field}.output"), "must be non-empty");
                }
            }
        }
        if self.instances.is_empty() {
            return fail("Instances", "at least one instance is required");
        }
        if self.instances.len() > INSTANCE_CAP {
            return fail("Instances", "more instances than the cap allows");
        }
        let mut seen = BTreeSet::new();
        for inst in &self.instances {
            if !seen.insert(inst.instance_id.as_str()) {
                return fail("Instances.id", &format!("duplicate instance id `{}`", inst.instance_id));
            }
            if inst.outputs.is_empty() {
                return fail("Instances.output", "at least one output is required");
            }
            if inst.outputs.iter().any(|o| o.trim().is_empty()) {
                return fail("Instances.output", "outputs must be non-empty");
            }
        }
        Ok(())
    }

    /// Canonical task-file JSON for this record.
    pub fn to_json(&self) -> String {
        schema::serialize_task(self)
    }

    /// Parses a task file body. The version is always 0.
    pub fn from_json(bytes: &[u8], file: &str, fallback_id: &str) -> Result<TaskRecord, CorpusError> {
        schema::parse_task(bytes, file, fallback_id)
    }
}

/// Keeps the first `limit` instances in file order.
pub fn cap_instances(mut task: TaskRecord, limit: usize) -> TaskRecord {
    let limit = limit.max(1);
    task.instances.truncate(limit);
    task
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CategoryBasis {
    #[default]
    TaskType,
    Domain,
    SourceDataset,
}

impl CategoryBasis {
    pub const ALL: [CategoryBasis; 3] = [
        CategoryBasis::TaskType,
        CategoryBasis::Domain,
        CategoryBasis::SourceDataset,
    ];

    pub fn parse(s: &str) -> Option<CategoryBasis> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "task_type" | "type" | "category" => Some(CategoryBasis::TaskType),
            "domain" => Some(CategoryBasis::Domain),
            "source_dataset" | "source" | "dataset" => Some(CategoryBasis::SourceDataset),
            _ => None,
        }
    }
}

impl fmt::Display for CategoryBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CategoryBasis::TaskType => "task_type",
            CategoryBasis::Domain => "domain",
            CategoryBasis::SourceDataset => "source_dataset",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub name: String,
    pub task_type: String,
    pub domain: String,
    pub source_dataset: String,
    pub version: u32,
}

/// Conjunctive filter; `None` fields match everything. Category fields
/// compare case-insensitively against the first listed value; `query` is a
/// case-insensitive substring search over name and definition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFilter {
    pub task_type: Option<String>,
    pub domain: Option<String>,
    pub source: Option<String>,
    pub query: Option<String>,
}

impl TaskFilter {
    pub fn matches(&self, task: &TaskRecord) -> bool {
        let eq = |want: &Option<String>, have: &str| {
            want.as_deref()
                .map(|w| w.trim().is_empty() || w.eq_ignore_ascii_case(have))
                .unwrap_or(true)
        };
        let query_ok = match self.query.as_deref().map(str::trim) {
            None | Some("") => true,
            Some(q) => {
                let q = q.to_lowercase();
                task.name.to_lowercase().contains(&q) || task.definition.to_lowercase().contains(&q)
            }
        };
        eq(&self.task_type, task.task_type())
            && eq(&self.domain, task.domain())
            && eq(&self.source, task.source_dataset())
            && query_ok
    }
}

/// Versioned task store with a category index over current versions.
///
/// Readers may share a corpus freely; [`TaskCorpus::save_version`] takes
/// `&mut self`, so writers are serialized by whoever owns it.
#[derive(Debug, Clone, Default)]
pub struct TaskCorpus {
    tasks: BTreeMap<String, Vec<Arc<TaskRecord>>>,
    category_index: BTreeMap<(CategoryBasis, String), BTreeSet<String>>,
    version_dir: Option<PathBuf>,
}

/// Result of loading a corpus: everything that validated, plus one error per
/// rejected file.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: TaskCorpus,
    pub errors: Vec<CorpusError>,
}

impl TaskCorpus {
    pub fn new() -> Self {
        TaskCorpus::default()
    }

    /// Inserts a freshly loaded record as version 0.
    pub fn insert(&mut self, mut task: TaskRecord) -> Result<(), CorpusError> {
        if self.tasks.contains_key(&task.task_id) {
            return Err(CorpusError::DuplicateId(task.task_id));
        }
        task = cap_instances(task, INSTANCE_CAP);
        task.version = 0;
        task.validate(&task.task_id)?;
        let id = task.task_id.clone();
        self.tasks.insert(id.clone(), vec![Arc::new(task)]);
        self.reindex(&id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn contains(&self, task_id: &str) -> bool {
        self.tasks.contains_key(task_id)
    }

    pub fn task_ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    /// Latest version of every task, ordered by task id.
    pub fn current(&self) -> impl Iterator<Item = &Arc<TaskRecord>> {
        self.tasks.values().filter_map(|v| v.last())
    }

    pub fn latest(&self, task_id: &str) -> Result<&Arc<TaskRecord>, CorpusError> {
        self.tasks
            .get(task_id)
            .and_then(|v| v.last())
            .ok_or_else(|| CorpusError::UnknownTask(task_id.to_string()))
    }

    pub fn get(&self, task_id: &str, version: u32) -> Result<&Arc<TaskRecord>, CorpusError> {
        let versions = self
            .tasks
            .get(task_id)
            .ok_or_else(|| CorpusError::UnknownTask(task_id.to_string()))?;
        versions
            .get(version as usize)
            .ok_or_else(|| CorpusError::UnknownVersion {
                task_id: task_id.to_string(),
                version,
            })
    }

    pub fn versions(&self, task_id: &str) -> Result<&[Arc<TaskRecord>], CorpusError> {
        self.tasks
            .get(task_id)
            .map(Vec::as_slice)
            .ok_or_else(|| CorpusError::UnknownTask(task_id.to_string()))
    }

    /// Appends `modified` as the next version of `task_id` and returns the new
    /// version number. Earlier versions are never touched. When a version
    /// directory is configured the record is written there first, so a failed
    /// write leaves the store unchanged.
    pub fn save_version(&mut self, task_id: &str, modified: TaskRecord) -> Result<u32, CorpusError> {
        let versions = self
            .tasks
            .get(task_id)
            .ok_or_else(|| CorpusError::UnknownTask(task_id.to_string()))?;
        let mut record = cap_instances(modified, INSTANCE_CAP);
        record.task_id = task_id.to_string();
        record.version = versions.len() as u32;
        record.validate(&format!("{task_id}@v{}", record.version))?;
        if let Some(dir) = &self.version_dir {
            persist_version(dir, &record)?;
        }
        let version = record.version;
        self.tasks
            .get_mut(task_id)
            .expect("checked above")
            .push(Arc::new(record));
        self.reindex(task_id);
        Ok(version)
    }

    /// Stable, id-ordered summaries of the current versions matching `filter`.
    pub fn list_tasks(&self, filter: &TaskFilter) -> Vec<TaskSummary> {
        self.current()
            .filter(|t| filter.matches(t))
            .map(|t| t.summary())
            .collect()
    }

    /// Task ids whose current version falls in `value` under `basis`.
    pub fn tasks_in_category(&self, basis: CategoryBasis, value: &str) -> BTreeSet<String> {
        self.category_index
            .get(&(basis, value.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn categories(&self, basis: CategoryBasis) -> Vec<String> {
        self.category_index
            .keys()
            .filter(|(b, _)| *b == basis)
            .map(|(_, v)| v.clone())
            .collect()
    }

    fn reindex(&mut self, task_id: &str) {
        for ids in self.category_index.values_mut() {
            ids.remove(task_id);
        }
        self.category_index.retain(|_, ids| !ids.is_empty());
        if let Some(task) = self.tasks.get(task_id).and_then(|v| v.last()) {
            for basis in CategoryBasis::ALL {
                self.category_index
                    .entry((basis, task.category(basis).to_string()))
                    .or_default()
                    .insert(task_id.to_string());
            }
        }
    }

    /// Rebuilds the whole category index from the stored tasks.
    pub fn rebuild_index(&mut self) {
        self.category_index.clear();
        let ids: Vec<String> = self.tasks.keys().cloned().collect();
        for id in ids {
            self.reindex(&id);
        }
    }

    /// Persists future versions under `dir` and restores any versions already
    /// saved there for tasks in this corpus. Returns the number restored.
    pub fn attach_version_dir(&mut self, dir: &Path) -> Result<usize, CorpusError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut restored = 0;
        for (task_id, versions) in self.tasks.iter_mut() {
            let task_dir = dir.join(sanitize(task_id));
            let mut v = versions.len() as u32;
            loop {
                let path = task_dir.join(format!("v{v}.json"));
                if !path.exists() {
                    break;
                }
                let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
                let mut record = TaskRecord::from_json(&bytes, &path.display().to_string(), task_id)?;
                record.version = v;
                record.validate(&path.display().to_string())?;
                versions.push(Arc::new(record));
                restored += 1;
                v += 1;
            }
        }
        self.version_dir = Some(dir.to_path_buf());
        self.rebuild_index();
        Ok(restored)
    }

    /// Writes the current version of every task as canonical task files.
    pub fn write_current(&self, dir: &Path) -> Result<(), CorpusError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for task in self.current() {
            let path = dir.join(format!("{}.json", sanitize(&task.task_id)));
            std::fs::write(&path, task.to_json()).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn sanitize(task_id: &str) -> String {
    task_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn persist_version(dir: &Path, record: &TaskRecord) -> Result<(), CorpusError> {
    let task_dir = dir.join(sanitize(&record.task_id));
    std::fs::create_dir_all(&task_dir).map_err(|e| io_err(&task_dir, e))?;
    let path = task_dir.join(format!("v{}.json", record.version));
    let tmp = task_dir.join(format!(".v{}.json.tmp", record.version));
    std::fs::write(&tmp, record.to_json()).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
}

/// Loads one task file or every `*.json` file in a directory (sorted by file
/// name, non-recursive). Files that fail to parse or validate are reported in
/// [`LoadReport::errors`]; the rest still load.
pub fn load_corpus(path: &Path) -> Result<LoadReport, CorpusError> {
    let meta = std::fs::metadata(path).map_err(|e| io_err(path, e))?;
    let files: Vec<PathBuf> = if meta.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    let mut corpus = TaskCorpus::new();
    let mut errors = Vec::new();
    for file in files {
        let label = file.display().to_string();
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let result = std::fs::read(&file)
            .map_err(|e| io_err(&file, e))
            .and_then(|bytes| TaskRecord::from_json(&bytes, &label, &stem))
            .map(|task| cap_instances(task, INSTANCE_CAP))
            .and_then(|task| {
                task.validate(&label)?;
                corpus.insert(task)
            });
        if let Err(e) = result {
            errors.push(e);
        }
    }
    Ok(LoadReport { corpus, errors })
}
