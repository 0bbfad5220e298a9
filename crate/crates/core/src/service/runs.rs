//! Registry of background evaluation runs.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::thread;

use super::ServiceError;
use crate::corpus::TaskRecord;
use crate::evalharness::{evaluate_task, EvalConfig, EvalRun, ModelClient, RunStatus};

#[derive(Debug, Default)]
struct Table {
    next_id: u64,
    runs: BTreeMap<String, EvalRun>,
    active: BTreeMap<(String, u32), String>,
}

/// All runs of the process. Finished runs are kept, so earlier versions stay
/// comparable after a task is modified.
#[derive(Debug, Default)]
pub struct RunRegistry {
    table: Mutex<Table>,
}

impl RunRegistry {
    pub fn get(&self, run_id: &str) -> Option<EvalRun> {
        self.table.lock().expect("run table poisoned").runs.get(run_id).cloned()
    }

    pub fn list(&self) -> Vec<EvalRun> {
        self.table.lock().expect("run table poisoned").runs.values().cloned().collect()
    }

    /// Registers a RUNNING run and evaluates it on a background thread.
    pub fn start(
        self: &Arc<Self>,
        task: Arc<TaskRecord>,
        client: Arc<dyn ModelClient>,
        config: EvalConfig,
    ) -> Result<EvalRun, ServiceError> {
        client
            .check_available()
            .map_err(|e| ServiceError::ClientUnavailable(e.to_string()))?;
        let key = (task.task_id.clone(), task.version);
        let pending = {
            let mut table = self.table.lock().expect("run table poisoned");
            if let Some(run_id) = table.active.get(&key) {
                return Err(ServiceError::ConcurrentRunExists {
                    task_id: key.0,
                    version: key.1,
                    run_id: run_id.clone(),
                });
            }
            table.next_id += 1;
            let run_id = format!("run-{:06}", table.next_id);
            let mut run = EvalRun::pending(&run_id, &task, client.name());
            run.status = RunStatus::Running;
            table.runs.insert(run_id.clone(), run.clone());
            table.active.insert(key.clone(), run_id);
            run
        };
        let registry = Arc::clone(self);
        let run_id = pending.run_id.clone();
        thread::spawn(move || {
            let finished = match evaluate_task(&task, client.as_ref(), &config) {
                Ok(run) => EvalRun { run_id: run_id.clone(), ..run },
                Err(e) => {
                    let mut failed = EvalRun::pending(&run_id, &task, client.name());
                    failed.status = RunStatus::Failed;
                    failed.errors.push(crate::evalharness::InstanceError {
                        instance_id: String::new(),
                        message: e.to_string(),
                    });
                    failed
                }
            };
            let mut table = registry.table.lock().expect("run table poisoned");
            table.runs.insert(run_id, finished);
            table.active.remove(&key);
        });
        Ok(pending)
    }
}
