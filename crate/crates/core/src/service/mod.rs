//! HTTP service: corpus upload, preprocessing, frequency inspection, model
//! runs as queued background jobs, and graph, metric and citation retrieval.
//!
//! State lives in memory behind one mutex and is mirrored to a data
//! directory so a restarted service picks up where it stopped: queued jobs
//! are queued again, jobs that were running are marked failed.

mod api;
mod jobs;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Semaphore};

use crate::corpus::{preprocess, Corpus, StopWordSet, SuffixStemmer};
use crate::embeddings::ProviderConfig;
use crate::error::{Error, Result};
use crate::graph::CitationIndex;
use crate::pipeline::{run, PipelineConfig, RunArtifacts};

pub use api::router;
pub use jobs::{Job, JobRequest, JobState};
use store::{SessionRecord, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Jobs allowed to run at once; the rest wait in FIFO order.
    pub max_concurrent_jobs: usize,
    pub provider: ProviderConfig,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("tmgraph-data"),
            max_concurrent_jobs: 2,
            provider: ProviderConfig::default(),
            cors_origin: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFlags {
    pub parsed: bool,
    pub interviewer_filtered: bool,
    pub lemmatized: bool,
    pub stopwords_applied: bool,
}

struct Session {
    raw: Corpus,
    keep_interviewer: bool,
    extra_stopwords: Vec<String>,
    flags: SessionFlags,
    processed: Option<Arc<Corpus>>,
}

impl Session {
    fn record(&self, corpus_id: &str) -> SessionRecord {
        SessionRecord {
            corpus_id: corpus_id.to_string(),
            raw: self.raw.clone(),
            keep_interviewer: self.keep_interviewer,
            extra_stopwords: self.extra_stopwords.clone(),
            flags: self.flags,
        }
    }
}

struct Model {
    job: Job,
    corpus: Arc<Corpus>,
    citations: Arc<CitationIndex>,
    artifacts: Option<Arc<RunArtifacts>>,
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, Session>,
    models: HashMap<String, Model>,
}

struct Shared {
    config: ServiceConfig,
    registry: Mutex<Registry>,
    queue: mpsc::UnboundedSender<String>,
    store: Store,
    running: AtomicUsize,
    peak_running: AtomicUsize,
}

/// Handle to the service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

pub fn session_stopwords(extra: &[String]) -> StopWordSet {
    StopWordSet::english_default().with_additional(extra.iter().map(String::as_str))
}

/// Preprocessing shared by the service and the CLI.
pub fn preprocess_with(raw: &Corpus, keep_interviewer: bool, extra_stopwords: &[String]) -> Result<Corpus> {
    preprocess(raw, keep_interviewer, &SuffixStemmer, &session_stopwords(extra_stopwords))
}

fn process_session(session: &mut Session) -> Result<()> {
    let processed = preprocess_with(&session.raw, session.keep_interviewer, &session.extra_stopwords)?;
    session.processed = Some(Arc::new(processed));
    session.flags = SessionFlags {
        parsed: true,
        interviewer_filtered: !session.keep_interviewer,
        lemmatized: true,
        stopwords_applied: true,
    };
    Ok(())
}

impl AppState {
    /// Opens (or creates) the data directory, restores stored sessions and
    /// jobs and starts the job dispatcher. Needs a running Tokio runtime.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let store = Store::open(&config.data_dir)?;
        let (tx, rx) = mpsc::unbounded_channel();
        let mut registry = Registry::default();
        for record in store.load_sessions()? {
            let mut session = Session {
                raw: record.raw,
                keep_interviewer: record.keep_interviewer,
                extra_stopwords: record.extra_stopwords,
                flags: record.flags,
                processed: None,
            };
            if session.flags.lemmatized {
                process_session(&mut session)?;
            }
            registry.sessions.insert(record.corpus_id, session);
        }
        let mut requeue = Vec::new();
        for (mut job, corpus, artifacts) in store.load_jobs()? {
            match job.state {
                JobState::Queued => requeue.push((job.created_at, job.id.clone())),
                JobState::Running => {
                    job.fail("interrupted by a service restart")?;
                    store.save_job(&job)?;
                }
                _ => {}
            }
            let citations = Arc::new(CitationIndex::build(&corpus));
            registry.models.insert(
                job.id.clone(),
                Model {
                    job,
                    corpus: Arc::new(corpus),
                    citations,
                    artifacts: artifacts.map(Arc::new),
                },
            );
        }
        requeue.sort();
        for (_, id) in requeue {
            let _ = tx.send(id);
        }
        let slots = config.max_concurrent_jobs.max(1);
        let state = Self {
            shared: Arc::new(Shared {
                config,
                registry: Mutex::new(registry),
                queue: tx,
                store,
                running: AtomicUsize::new(0),
                peak_running: AtomicUsize::new(0),
            }),
        };
        tokio::spawn(dispatch(state.clone(), rx, slots));
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.shared.config
    }

    fn registry(&self) -> MutexGuard<'_, Registry> {
        self.shared.registry.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Largest number of jobs observed running at the same time.
    pub fn peak_running(&self) -> usize {
        self.shared.peak_running.load(Ordering::SeqCst)
    }

    pub fn job(&self, id: &str) -> Option<Job> {
        self.registry().models.get(id).map(|m| m.job.clone())
    }

    fn add_corpus(&self, raw: Corpus) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            raw,
            keep_interviewer: true,
            extra_stopwords: Vec::new(),
            flags: SessionFlags {
                parsed: true,
                ..Default::default()
            },
            processed: None,
        };
        self.shared.store.save_session(&session.record(&id))?;
        self.registry().sessions.insert(id.clone(), session);
        Ok(id)
    }

    fn enqueue(&self, corpus_id: &str, corpus: Arc<Corpus>, request: JobRequest) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job::new(id.clone(), corpus_id.to_string(), request);
        self.shared.store.save_job_corpus(&id, &corpus)?;
        self.shared.store.save_job(&job)?;
        let citations = Arc::new(CitationIndex::build(&corpus));
        self.registry().models.insert(
            id.clone(),
            Model {
                job,
                corpus,
                citations,
                artifacts: None,
            },
        );
        self.shared
            .queue
            .send(id.clone())
            .map_err(|_| Error::invalid("job queue closed"))?;
        Ok(id)
    }

    fn pipeline_config(&self, request: &JobRequest) -> PipelineConfig {
        PipelineConfig {
            provider: self.shared.config.provider.clone(),
            ..PipelineConfig::new(request.method, request.num_topics, request.seed)
        }
    }

    async fn execute(&self, id: String) {
        let started = {
            let mut reg = self.registry();
            let Some(model) = reg.models.get_mut(&id) else {
                return;
            };
            if model.job.transition(JobState::Running).is_err() {
                return;
            }
            let _ = self.shared.store.save_job(&model.job);
            (model.job.config, model.corpus.clone())
        };
        let now = self.shared.running.fetch_add(1, Ordering::SeqCst) + 1;
        self.shared.peak_running.fetch_max(now, Ordering::SeqCst);
        let (request, corpus) = started;
        let config = self.pipeline_config(&request);
        let outcome = tokio::task::spawn_blocking(move || run(&config, &corpus).and_then(|r| r.artifacts()))
            .await
            .unwrap_or_else(|e| Err(Error::invalid(format!("job panicked: {e}"))));
        self.shared.running.fetch_sub(1, Ordering::SeqCst);

        let mut reg = self.registry();
        let Some(model) = reg.models.get_mut(&id) else {
            return;
        };
        match outcome.and_then(|a| self.shared.store.save_artifacts(&id, &a).map(|_| a)) {
            Ok(artifacts) => {
                model.artifacts = Some(Arc::new(artifacts));
                let _ = model.job.transition(JobState::Done);
            }
            Err(e) => {
                tracing::warn!(job = %id, error = %e, "job failed");
                let _ = model.job.fail(e.to_string());
            }
        }
        let _ = self.shared.store.save_job(&model.job);
    }
}

async fn dispatch(state: AppState, mut rx: mpsc::UnboundedReceiver<String>, slots: usize) {
    let permits = Arc::new(Semaphore::new(slots));
    loop {
        let Ok(permit) = permits.clone().acquire_owned().await else {
            break;
        };
        let Some(id) = rx.recv().await else {
            break;
        };
        let state = state.clone();
        tokio::spawn(async move {
            state.execute(id).await;
            drop(permit);
        });
    }
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<()> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::invalid(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::invalid(format!("server error: {e}")))
}
