//! Asynchronous jobs on a bounded pool of worker threads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::artifacts::now_ms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Execute,
    ResolveInstall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    /// Whether `self -> next` is a legal transition.
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Queued, JobState::Failed)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Job this one waits on, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<String>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

type Task = Box<dyn FnOnce() + Send>;

pub struct JobManager {
    jobs: Mutex<BTreeMap<String, Job>>,
    next: AtomicU64,
    queue: Mutex<Option<Sender<Task>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

fn worker(rx: Arc<Mutex<Receiver<Task>>>) {
    loop {
        let task = match rx.lock().unwrap_or_else(|e| e.into_inner()).recv() {
            Ok(t) => t,
            Err(_) => return,
        };
        task();
    }
}

impl JobManager {
    pub fn new(workers: usize) -> Arc<Self> {
        let (tx, rx) = channel::<Task>();
        let rx = Arc::new(Mutex::new(rx));
        let handles = (0..workers.max(1))
            .map(|i| {
                let rx = Arc::clone(&rx);
                std::thread::Builder::new()
                    .name(format!("genflow-job-{i}"))
                    .spawn(move || worker(rx))
                    .expect("spawn job worker")
            })
            .collect();
        Arc::new(Self {
            jobs: Mutex::new(BTreeMap::new()),
            next: AtomicU64::new(1),
            queue: Mutex::new(Some(tx)),
            workers: Mutex::new(handles),
        })
    }

    /// Register a queued job.
    pub fn create(&self, kind: JobKind, after: Option<String>) -> String {
        let id = format!("job-{:06}", self.next.fetch_add(1, Ordering::Relaxed));
        let now = now_ms();
        self.jobs.lock().unwrap_or_else(|e| e.into_inner()).insert(
            id.clone(),
            Job {
                id: id.clone(),
                kind,
                state: JobState::Queued,
                result: None,
                error: None,
                after,
                created_ms: now,
                updated_ms: now,
            },
        );
        id
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.jobs.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    /// Move a job forward. Illegal transitions are refused and return false.
    pub fn transition(&self, id: &str, state: JobState, result: Option<Value>, error: Option<String>) -> bool {
        let mut jobs = self.jobs.lock().unwrap_or_else(|e| e.into_inner());
        let Some(job) = jobs.get_mut(id) else {
            return false;
        };
        if !job.state.can_become(state) {
            log::warn!("refusing job {id} transition {:?} -> {state:?}", job.state);
            return false;
        }
        job.state = state;
        if result.is_some() {
            job.result = result;
        }
        if error.is_some() {
            job.error = error;
        }
        job.updated_ms = now_ms();
        true
    }

    pub fn start(&self, id: &str) -> bool {
        self.transition(id, JobState::Running, None, None)
    }

    pub fn finish(&self, id: &str, result: Value) -> bool {
        self.transition(id, JobState::Done, Some(result), None)
    }

    pub fn fail(&self, id: &str, error: impl Into<String>) -> bool {
        self.transition(id, JobState::Failed, None, Some(error.into()))
    }

    /// Queue work on the pool.
    pub fn submit(&self, task: impl FnOnce() + Send + 'static) {
        let queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        match queue.as_ref() {
            Some(tx) => tx.send(Box::new(task)).expect("job workers alive"),
            None => log::error!("job manager is shut down; task dropped"),
        }
    }

    /// Stop accepting work and wait for queued tasks to finish.
    pub fn shutdown(&self) {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).take();
        let handles: Vec<_> = self.workers.lock().unwrap_or_else(|e| e.into_inner()).drain(..).collect();
        for h in handles {
            let _ = h.join();
        }
    }
}
