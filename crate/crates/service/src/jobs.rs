//! In-memory registry of analysis jobs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use cometa_core::pipeline::{PipelineConfig, Stage};
use serde::Serialize;
use uuid::Uuid;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running {
        stage: Stage,
    },
    Done {
        bundle_id: String,
    },
    Failed {
        stage: Stage,
        message: String,
        retryable: bool,
    },
}

impl JobState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, JobState::Done { .. } | JobState::Failed { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: Uuid,
    pub config_hash: String,
    #[serde(flatten)]
    pub state: JobState,
}

#[derive(Debug, Clone, Default)]
pub struct JobRegistry {
    inner: Arc<Mutex<HashMap<Uuid, Job>>>,
}

impl JobRegistry {
    pub fn submit(&self, config: &PipelineConfig) -> Uuid {
        let id = Uuid::new_v4();
        let job = Job {
            id,
            config_hash: config.hash(),
            state: JobState::Queued,
        };
        self.inner.lock().expect("job registry poisoned").insert(id, job);
        id
    }

    pub fn get(&self, id: &Uuid) -> Option<Job> {
        self.inner.lock().expect("job registry poisoned").get(id).cloned()
    }

    /// Apply a transition. Terminal states are final, and a running job
    /// only moves forward through the stages.
    pub fn update(&self, id: &Uuid, next: JobState) {
        let mut jobs = self.inner.lock().expect("job registry poisoned");
        let Some(job) = jobs.get_mut(id) else { return };
        let allowed = match (&job.state, &next) {
            (s, _) if s.is_terminal() => false,
            (JobState::Running { stage: a }, JobState::Running { stage: b }) => stage_rank(*b) >= stage_rank(*a),
            (JobState::Running { .. }, JobState::Queued) => false,
            _ => true,
        };
        if allowed {
            job.state = next;
        } else {
            log::warn!("ignored job transition {:?} -> {:?}", job.state, next);
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("job registry poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn stage_rank(stage: Stage) -> u8 {
    stage as u8
}
