//! Background jobs with a bounded worker pool.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobDescriptor {
    pub id: String,
    pub kind: String,
    pub status: JobStatus,
    /// Completed fraction in [0, 1].
    pub progress: f64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Job table shared between handlers and workers.
#[derive(Debug, Clone)]
pub struct JobRegistry {
    jobs: Arc<Mutex<BTreeMap<String, JobDescriptor>>>,
    pool: Arc<Semaphore>,
}

/// Handle given to a running job for reporting progress.
#[derive(Debug, Clone)]
pub struct JobHandle {
    id: String,
    jobs: Arc<Mutex<BTreeMap<String, JobDescriptor>>>,
}

impl JobHandle {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Progress only moves forward and never past a terminal state.
    pub fn progress(&self, fraction: f64) {
        let mut jobs = self.jobs.lock().unwrap();
        if let Some(j) = jobs.get_mut(&self.id) {
            if !j.status.is_terminal() && fraction.is_finite() {
                j.progress = j.progress.max(fraction.clamp(0.0, 1.0));
            }
        }
    }

    fn set_status(&self, status: JobStatus) {
        let mut jobs = self.jobs.lock().unwrap();
        if let Some(j) = jobs.get_mut(&self.id) {
            if !j.status.is_terminal() {
                j.status = status;
            }
        }
    }

    fn finish(&self, outcome: Result<serde_json::Value, String>) {
        let mut jobs = self.jobs.lock().unwrap();
        if let Some(j) = jobs.get_mut(&self.id) {
            if j.status.is_terminal() {
                return;
            }
            match outcome {
                Ok(v) => {
                    j.status = JobStatus::Done;
                    j.progress = 1.0;
                    j.result = Some(v);
                }
                Err(e) => {
                    j.status = JobStatus::Failed;
                    j.error = Some(e);
                }
            }
        }
    }
}

impl JobRegistry {
    pub fn new(workers: usize) -> Self {
        JobRegistry {
            jobs: Arc::default(),
            pool: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn get(&self, id: &str) -> Option<JobDescriptor> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    pub fn list(&self) -> Vec<JobDescriptor> {
        self.jobs.lock().unwrap().values().cloned().collect()
    }

    /// Queues `work` unless an identical configuration is already queued, running or done.
    ///
    /// Returns the descriptor and whether a new job was created. Must be called
    /// inside a tokio runtime.
    pub fn submit<F>(&self, kind: &str, config_hash: &str, work: F) -> (JobDescriptor, bool)
    where
        F: FnOnce(&JobHandle) -> Result<serde_json::Value, ServiceError> + Send + 'static,
    {
        let id = format!("{kind}-{}", &config_hash[..config_hash.len().min(16)]);
        {
            let mut jobs = self.jobs.lock().unwrap();
            if let Some(j) = jobs.get(&id) {
                if j.status != JobStatus::Failed {
                    return (j.clone(), false);
                }
            }
            jobs.insert(
                id.clone(),
                JobDescriptor {
                    id: id.clone(),
                    kind: kind.to_string(),
                    status: JobStatus::Queued,
                    progress: 0.0,
                    config_hash: config_hash.to_string(),
                    result: None,
                    error: None,
                },
            );
        }
        let handle = JobHandle {
            id: id.clone(),
            jobs: self.jobs.clone(),
        };
        let pool = self.pool.clone();
        tokio::spawn(async move {
            let Ok(_permit) = pool.acquire_owned().await else {
                handle.finish(Err("worker pool closed".into()));
                return;
            };
            handle.set_status(JobStatus::Running);
            let h = handle.clone();
            let out = tokio::task::spawn_blocking(move || work(&h)).await;
            let outcome = match out {
                Ok(Ok(v)) => Ok(v),
                Ok(Err(e)) => Err(e.to_string()),
                Err(e) => Err(format!("job panicked: {e}")),
            };
            handle.finish(outcome);
        });
        (self.get(&id).expect("just inserted"), true)
    }
}
