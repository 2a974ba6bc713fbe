use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::jobs::Job;
use super::SessionFlags;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pipeline::RunArtifacts;

/// On-disk layout under the data directory:
/// `corpora/<id>.json` and `jobs/<id>/{job,corpus,topics,metrics,graph}.json`.
#[derive(Debug, Clone)]
pub(crate) struct Store {
    root: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SessionRecord {
    pub corpus_id: String,
    pub raw: Corpus,
    pub keep_interviewer: bool,
    pub extra_stopwords: Vec<String>,
    pub flags: SessionFlags,
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}

impl Store {
    pub fn open(root: &Path) -> Result<Self> {
        for sub in ["corpora", "jobs"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(id)
    }

    pub fn save_session(&self, record: &SessionRecord) -> Result<()> {
        let path = self.root.join("corpora").join(format!("{}.json", record.corpus_id));
        write_atomic(&path, &serde_json::to_vec(record)?)
    }

    pub fn load_sessions(&self) -> Result<Vec<SessionRecord>> {
        read_dir_sorted(&self.root.join("corpora"))?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .map(|p| read_json(&p))
            .collect()
    }

    pub fn save_job(&self, job: &Job) -> Result<()> {
        let dir = self.job_dir(&job.id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join("job.json"), &serde_json::to_vec_pretty(job)?)
    }

    pub fn save_job_corpus(&self, id: &str, corpus: &Corpus) -> Result<()> {
        let dir = self.job_dir(id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join("corpus.json"), &serde_json::to_vec(corpus)?)
    }

    pub fn save_artifacts(&self, id: &str, artifacts: &RunArtifacts) -> Result<()> {
        let dir = self.job_dir(id);
        for (name, body) in artifacts.files() {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }

    /// Every stored job with its corpus snapshot and, when present, its
    /// artifacts.
    pub fn load_jobs(&self) -> Result<Vec<(Job, Corpus, Option<RunArtifacts>)>> {
        let mut out = Vec::new();
        for dir in read_dir_sorted(&self.root.join("jobs"))? {
            if !dir.join("job.json").exists() {
                continue;
            }
            let job: Job = read_json(&dir.join("job.json"))?;
            let corpus: Corpus = read_json(&dir.join("corpus.json"))?;
            let read = |name: &str| std::fs::read_to_string(dir.join(name)).ok();
            let artifacts = match (read("topics.json"), read("metrics.json"), read("graph.json")) {
                (Some(topics), Some(metrics), Some(graph)) => Some(RunArtifacts { topics, metrics, graph }),
                _ => None,
            };
            out.push((job, corpus, artifacts));
        }
        Ok(out)
    }
}
