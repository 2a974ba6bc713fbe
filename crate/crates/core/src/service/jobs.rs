use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Allowed moves: queued to running, running to done or failed.
    pub fn can_move_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }

    /// Position along the only path through the machine.
    pub fn rank(self) -> u8 {
        match self {
            JobState::Queued => 0,
            JobState::Running => 1,
            JobState::Done | JobState::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRequest {
    pub method: Method,
    pub num_topics: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub corpus_id: String,
    pub state: JobState,
    pub config: JobRequest,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub(crate) fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Job {
    pub fn new(id: String, corpus_id: String, config: JobRequest) -> Self {
        Self {
            id,
            corpus_id,
            state: JobState::Queued,
            config,
            created_at: now_millis(),
            started_at: None,
            finished_at: None,
            error: None,
        }
    }

    pub fn transition(&mut self, next: JobState) -> Result<()> {
        if !self.state.can_move_to(next) {
            return Err(Error::invalid(format!(
                "job {} cannot move from {:?} to {:?}",
                self.id, self.state, next
            )));
        }
        let now = now_millis();
        match next {
            JobState::Running => self.started_at = Some(now),
            _ => self.finished_at = Some(now),
        }
        self.state = next;
        Ok(())
    }

    pub fn fail(&mut self, message: impl Into<String>) -> Result<()> {
        self.transition(JobState::Failed)?;
        self.error = Some(message.into());
        Ok(())
    }
}
