//! C ABI for tmgraph.
//!
//! Every function returns a [`TmStatus`]; on failure the message is available
//! from [`tm_last_error`] on the same thread. Handles are opaque and must be
//! released with their `_free` function. Strings returned through `out`
//! parameters are owned by the caller and released with [`tm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tmgraph::corpus::{frequency_table, Corpus, SpeakerRules};
use tmgraph::graph::citations_for;
use tmgraph::pipeline::{run, Method, PipelineConfig, PipelineRun, RunArtifacts};
use tmgraph::service::preprocess_with;
use tmgraph::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    EmptyInput = 4,
    TooFewDocuments = 5,
    NoTopics = 6,
    Provider = 7,
    Format = 8,
    Io = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmArtifact {
    Topics = 0,
    Metrics = 1,
    Graph = 2,
}

/// A preprocessed corpus.
pub struct TmCorpus {
    corpus: Corpus,
}

/// A finished model run and its serialized artifacts.
pub struct TmRun {
    run: PipelineRun,
    artifacts: RunArtifacts,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TmStatus {
    match e.root() {
        Error::EmptyTranscript | Error::EmptyVocabulary => TmStatus::EmptyInput,
        Error::TooFewDocuments { .. } => TmStatus::TooFewDocuments,
        Error::NoTopics => TmStatus::NoTopics,
        Error::ProviderUnavailable(_) | Error::LemmatizerUnavailable(_) => TmStatus::Provider,
        Error::Alignment(_) | Error::Format(_) | Error::Json(_) => TmStatus::Format,
        Error::Io { .. } => TmStatus::Io,
        _ => TmStatus::InvalidArgument,
    }
}

struct Failure(TmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TmStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            TmStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    let c = CString::new(value).map_err(|_| Failure(TmStatus::Format, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn tm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `count` transcripts (`I:`/`R:` speaker prefixes) and preprocesses
/// them with the default stop words. `ids` may be null, in which case
/// documents are named `doc_0`, `doc_1`, ...
#[no_mangle]
pub unsafe extern "C" fn tm_corpus_new(
    ids: *const *const c_char,
    texts: *const *const c_char,
    count: usize,
    keep_interviewer: bool,
    out: *mut *mut TmCorpus,
) -> TmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if texts.is_null() {
            return Err(null("texts"));
        }
        if count == 0 {
            return Err(Failure(TmStatus::EmptyInput, "no transcripts given".into()));
        }
        let mut docs = Vec::with_capacity(count);
        for i in 0..count {
            let text = read_str(*texts.add(i), "transcript")?;
            let id = if ids.is_null() {
                format!("doc_{i}")
            } else {
                read_str(*ids.add(i), "document id")?.to_string()
            };
            docs.push((id, text));
        }
        let raw = Corpus::from_texts(docs.iter().map(|(id, t)| (id.as_str(), *t)), &SpeakerRules::default())?;
        let corpus = preprocess_with(&raw, keep_interviewer, &[])?;
        *out = Box::into_raw(Box::new(TmCorpus { corpus }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tm_corpus_free(corpus: *mut TmCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of sentences that will be modeled.
#[no_mangle]
pub unsafe extern "C" fn tm_corpus_sentence_count(corpus: *const TmCorpus, out: *mut usize) -> TmStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c.corpus.modeled_sentences().len();
        Ok(())
    })
}

/// JSON array of `{"lemma", "count"}`, most frequent first.
#[no_mangle]
pub unsafe extern "C" fn tm_corpus_frequencies(
    corpus: *const TmCorpus,
    limit: usize,
    out: *mut *mut c_char,
) -> TmStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rows: Vec<serde_json::Value> = frequency_table(&c.corpus, limit)
            .into_iter()
            .map(|(lemma, count)| serde_json::json!({ "lemma": lemma, "count": count }))
            .collect();
        write_string(out, serde_json::to_string(&rows).map_err(Error::from)?)
    })
}

/// JSON array of the sentences containing `lemma`.
#[no_mangle]
pub unsafe extern "C" fn tm_corpus_citations(
    corpus: *const TmCorpus,
    lemma: *const c_char,
    out: *mut *mut c_char,
) -> TmStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let lemma = read_str(lemma, "lemma")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cites = citations_for(lemma, &c.corpus);
        write_string(out, serde_json::to_string(&cites).map_err(Error::from)?)
    })
}

fn fit(corpus: &Corpus, config: &PipelineConfig) -> Result<TmRun, Failure> {
    let run = run(config, corpus)?;
    let artifacts = run.artifacts()?;
    Ok(TmRun { run, artifacts })
}

/// Fits one model with default settings. `method` is one of `lda`,
/// `embed_kmeans`, `embed_hdbscan`, `lda_embed_kmeans`, `lda_embed_hdbscan`.
#[no_mangle]
pub unsafe extern "C" fn tm_run_new(
    corpus: *const TmCorpus,
    method: *const c_char,
    num_topics: usize,
    seed: u64,
    out: *mut *mut TmRun,
) -> TmStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let method: Method = read_str(method, "method")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = fit(&c.corpus, &PipelineConfig::new(method, num_topics, seed))?;
        *out = Box::into_raw(Box::new(r));
        Ok(())
    })
}

/// Fits one model from a JSON pipeline configuration; omitted fields take
/// their defaults.
#[no_mangle]
pub unsafe extern "C" fn tm_run_with_config(
    corpus: *const TmCorpus,
    config_json: *const c_char,
    out: *mut *mut TmRun,
) -> TmStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let config: PipelineConfig =
            serde_json::from_str(read_str(config_json, "config")?).map_err(Error::from)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = fit(&c.corpus, &config)?;
        *out = Box::into_raw(Box::new(r));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tm_run_free(run: *mut TmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tm_run_topic_count(run: *const TmRun, out: *mut usize) -> TmStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = r.run.result.topics.len();
        Ok(())
    })
}

/// One of the run's JSON artifacts, byte-identical to the files the CLI
/// writes and the service serves.
#[no_mangle]
pub unsafe extern "C" fn tm_run_artifact(run: *const TmRun, kind: TmArtifact, out: *mut *mut c_char) -> TmStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let body = match kind {
            TmArtifact::Topics => &r.artifacts.topics,
            TmArtifact::Metrics => &r.artifacts.metrics,
            TmArtifact::Graph => &r.artifacts.graph,
        };
        write_string(out, body.clone())
    })
}
