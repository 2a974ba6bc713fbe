//! The five end-to-end topic-model pipelines, their run artifacts, and the
//! side-by-side metric comparison.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::cluster::{dbcv, hdbscan, kmeans, silhouette, ClusterLabels, HdbscanParams};
use crate::coherence::{coherence_scores, MetricReport, MetricValue};
use crate::corpus::{model_units, Corpus, Granularity};
use crate::embeddings::ProviderConfig;
use crate::error::{Error, Result, StageExt};
use crate::graph::{build_graph, export_graph_json, ConceptGraph};
use crate::lda::{fit_lda, LdaParams};
use crate::reduce::{umap, UmapParams};
use crate::topics::{assemble_topics, reduce_topics, topic_diversity, Keyword, Merge, Topic, TopicModelResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lda,
    EmbedKmeans,
    EmbedHdbscan,
    LdaEmbedKmeans,
    LdaEmbedHdbscan,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lda,
        Method::EmbedKmeans,
        Method::EmbedHdbscan,
        Method::LdaEmbedKmeans,
        Method::LdaEmbedHdbscan,
    ];

    /// Column order of the comparison table.
    pub const TABLE_ORDER: [Method; 5] = [
        Method::Lda,
        Method::LdaEmbedKmeans,
        Method::EmbedHdbscan,
        Method::LdaEmbedHdbscan,
        Method::EmbedKmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lda => "lda",
            Method::EmbedKmeans => "embed_kmeans",
            Method::EmbedHdbscan => "embed_hdbscan",
            Method::LdaEmbedKmeans => "lda_embed_kmeans",
            Method::LdaEmbedHdbscan => "lda_embed_hdbscan",
        }
    }

    pub fn uses_lda(self) -> bool {
        matches!(self, Method::Lda | Method::LdaEmbedKmeans | Method::LdaEmbedHdbscan)
    }

    pub fn uses_embeddings(self) -> bool {
        self != Method::Lda
    }

    pub fn uses_hdbscan(self) -> bool {
        matches!(self, Method::EmbedHdbscan | Method::LdaEmbedHdbscan)
    }

    pub fn uses_kmeans(self) -> bool {
        matches!(self, Method::EmbedKmeans | Method::LdaEmbedKmeans)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method {s:?}; expected one of lda, embed_kmeans, embed_hdbscan, lda_embed_kmeans, lda_embed_hdbscan"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaSettings {
    /// `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 0.01,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub method: Method,
    pub num_topics: usize,
    /// Overrides the seeds of every stage.
    pub seed: u64,
    /// Keywords per topic.
    pub keywords: usize,
    pub diversity_k: usize,
    pub granularity: Granularity,
    pub provider: ProviderConfig,
    pub umap: UmapParams,
    pub hdbscan: HdbscanParams,
    pub lda: LdaSettings,
    pub kmeans_max_iter: usize,
    /// Output width of the truncated SVD in the hybrid pipelines.
    pub svd_dim: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::EmbedHdbscan,
            num_topics: 10,
            seed: 0,
            keywords: 10,
            diversity_k: 25,
            granularity: Granularity::Sentence,
            provider: ProviderConfig::default(),
            umap: UmapParams::default(),
            hdbscan: HdbscanParams::default(),
            lda: LdaSettings::default(),
            kmeans_max_iter: 300,
            svd_dim: 32,
        }
    }
}

impl PipelineConfig {
    pub fn new(method: Method, num_topics: usize, seed: u64) -> Self {
        Self {
            method,
            num_topics,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub result: TopicModelResult,
    pub metrics: MetricReport,
    pub graph: ConceptGraph,
    /// Topic merges applied after HDBSCAN.
    pub merges: Vec<Merge>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub timings: Vec<StageTiming>,
    pub total_seconds: f64,
}

/// The byte-deterministic files of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub topics: String,
    pub metrics: String,
    pub graph: String,
}

impl RunArtifacts {
    pub const FILES: [&'static str; 3] = ["topics.json", "metrics.json", "graph.json"];

    pub fn files(&self) -> [(&'static str, &str); 3] {
        [
            (Self::FILES[0], self.topics.as_str()),
            (Self::FILES[1], self.metrics.as_str()),
            (Self::FILES[2], self.graph.as_str()),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct TopicsArtifact<'a> {
    method: Method,
    num_topics: usize,
    seed: u64,
    topics: &'a [Topic],
    assignments: &'a [i64],
    noise: &'a [usize],
    merges: &'a [Merge],
    warnings: &'a [String],
    notes: &'a [String],
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl PipelineRun {
    pub fn artifacts(&self) -> Result<RunArtifacts> {
        Ok(RunArtifacts {
            topics: pretty(&TopicsArtifact {
                method: self.config.method,
                num_topics: self.config.num_topics,
                seed: self.config.seed,
                topics: &self.result.topics,
                assignments: &self.result.assignments,
                noise: &self.result.noise,
                merges: &self.merges,
                warnings: &self.warnings,
                notes: &self.notes,
            })?,
            metrics: pretty(&self.metrics)?,
            graph: export_graph_json(&self.graph)?,
        })
    }
}

/// Projects `x` onto its top `dim` right singular vectors. Each singular
/// vector's largest-magnitude component is made positive.
pub fn truncated_svd(x: ArrayView2<f64>, dim: usize) -> Array2<f64> {
    let (n, c) = x.dim();
    let r = dim.min(c).max(1);
    let m = DMatrix::from_fn(n, c, |i, j| x[[i, j]]);
    let gram = m.transpose() * &m;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut basis = DMatrix::<f64>::zeros(c, r);
    for (k, &col) in order.iter().take(r).enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..c).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..c {
            basis[(i, k)] = sign * v[i];
        }
    }
    let projected = m * basis;
    Array2::from_shape_fn((n, r), |(i, j)| projected[(i, j)])
}

struct Timer {
    timings: Vec<StageTiming>,
    started: Instant,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs one pipeline on a preprocessed corpus.
pub fn run(config: &PipelineConfig, corpus: &Corpus) -> Result<PipelineRun> {
    let mut timer = Timer {
        timings: Vec::new(),
        started: Instant::now(),
    };
    if config.num_topics == 0 {
        return Err(Error::invalid("num_topics must be at least 1"));
    }
    if !corpus.lemmatized {
        return Err(Error::invalid("corpus must be preprocessed before modeling"));
    }
    let method = config.method;
    let units = model_units(corpus, config.granularity);
    if units.is_empty() {
        return Err(Error::EmptyVocabulary).stage("units");
    }
    let lemmas: Vec<&[String]> = units.iter().map(|u| u.lemmas.as_slice()).collect();
    let k = config.num_topics;
    let m = config.keywords;
    let mut warnings = Vec::new();
    let mut notes = Vec::new();

    let lda = if method.uses_lda() {
        let params = LdaParams {
            topics: k,
            alpha: config.lda.alpha,
            beta: config.lda.beta,
            iterations: config.lda.iterations,
            seed: config.seed,
        };
        Some(timer.time("lda", || fit_lda(&lemmas, params)).stage("lda")?)
    } else {
        None
    };
    let embeddings = if method.uses_embeddings() {
        let provider = ProviderConfig {
            seed: config.seed,
            ..config.provider.clone()
        };
        Some(timer.time("embed", || provider.embed(&units)).stage("embed")?)
    } else {
        None
    };

    let features: Option<Array2<f64>> = match (&lda, &embeddings) {
        (Some(model), Some(emb)) => {
            let joined = concatenate(Axis(1), &[model.features().view(), emb.values().view()])
                .map_err(|e| Error::invalid(e.to_string()))
                .stage("features")?;
            notes.push(format!(
                "hybrid features: LDA topic proportions joined with embeddings and reduced to {} dimensions by truncated SVD, standing in for an autoencoder",
                config.svd_dim.min(joined.ncols())
            ));
            Some(timer.time("svd", || truncated_svd(joined.view(), config.svd_dim)))
        }
        (None, Some(emb)) => Some(emb.values().clone()),
        _ => None,
    };

    let mut merges = Vec::new();
    let mut silhouette_score = MetricValue::Na;
    let mut dbcv_score = MetricValue::Na;
    let mut result = match method {
        Method::Lda => {
            let model = lda.as_ref().expect("lda fitted");
            let assign = model.assignments();
            let topics = (0..model.num_topics())
                .map(|t| {
                    Ok(Topic {
                        id: t,
                        keywords: model
                            .top_keywords(t, m)?
                            .into_iter()
                            .map(|(lemma, weight)| Keyword { lemma, weight })
                            .collect(),
                        members: (0..assign.len()).filter(|&i| assign[i] == t).collect(),
                        centroid: None,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .stage("keywords")?;
            TopicModelResult {
                method: String::new(),
                topics,
                assignments: assign.iter().map(|&a| a as i64).collect(),
                noise: Vec::new(),
            }
        }
        Method::EmbedKmeans | Method::LdaEmbedKmeans => {
            let x = features.as_ref().expect("features built");
            if k > x.nrows() {
                return Err(Error::TooFewDocuments {
                    units: x.nrows(),
                    topics: k,
                })
                .stage("cluster");
            }
            let model = timer
                .time("cluster", || kmeans(x.view(), k, config.seed, config.kmeans_max_iter))
                .stage("cluster")?;
            let labels = ClusterLabels::from_assignments(&model.labels);
            silhouette_score = MetricValue::from_result(silhouette(x.view(), &labels));
            assemble_topics(&labels, &lemmas, m, Some(x.view())).stage("topics")?
        }
        Method::EmbedHdbscan | Method::LdaEmbedHdbscan => {
            let x = features.as_ref().expect("features built");
            let space = if method == Method::EmbedHdbscan {
                let mut params = config.umap.clone();
                params.layout.seed = config.seed;
                timer.time("umap", || umap(x.view(), &params)).stage("umap")?.coords
            } else {
                x.clone()
            };
            let (labels, _tree) = timer
                .time("cluster", || hdbscan(space.view(), config.hdbscan))
                .stage("cluster")?;
            let noise = labels.noise_count() as f64 / labels.labels.len() as f64;
            if noise > 0.5 {
                warnings.push(format!("HDBSCAN labelled {:.1}% of units as noise", noise * 100.0));
            }
            let found = assemble_topics(&labels, &lemmas, m, Some(x.view())).stage("topics")?;
            if found.topics.len() < k {
                warnings.push(format!(
                    "HDBSCAN found {} topics, fewer than the {} requested",
                    found.topics.len(),
                    k
                ));
            }
            let (reduced, log) = timer
                .time("reduce", || reduce_topics(&found, k, &lemmas, x.view(), m))
                .stage("reduce")?;
            merges = log;
            dbcv_score = MetricValue::from_result(dbcv(space.view(), &reduced.labels()));
            reduced
        }
    };
    result.method = method.as_str().to_string();

    let keyword_lists: Vec<Vec<&str>> = result.topics.iter().map(|t| t.lemmas()).collect();
    let coherence = timer.time("coherence", || coherence_scores(&keyword_lists, &lemmas));
    let metrics = MetricReport {
        c_v: coherence.c_v,
        umass: coherence.umass,
        npmi: coherence.npmi,
        uci: coherence.uci,
        topic_diversity: MetricValue::from_result(topic_diversity(&result, config.diversity_k)),
        silhouette: silhouette_score,
        dbcv: dbcv_score,
    };
    let graph = timer.time("graph", || build_graph(&result)).stage("graph")?;
    Ok(PipelineRun {
        config: config.clone(),
        result,
        metrics,
        graph,
        merges,
        warnings,
        notes,
        total_seconds: timer.started.elapsed().as_secs_f64(),
        timings: timer.timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonColumn {
    pub method: Method,
    pub metrics: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub columns: Vec<ComparisonColumn>,
}

/// Runs every config on the same corpus. A failed run becomes an all-NA
/// column carrying its error message.
pub fn compare(configs: &[PipelineConfig], corpus: &Corpus) -> Comparison {
    Comparison {
        columns: configs
            .iter()
            .map(|c| match run(c, corpus) {
                Ok(r) => ComparisonColumn {
                    method: c.method,
                    metrics: r.metrics,
                    error: None,
                },
                Err(e) => ComparisonColumn {
                    method: c.method,
                    metrics: MetricReport::default(),
                    error: Some(e.to_string()),
                },
            })
            .collect(),
    }
}

impl Comparison {
    /// Fixed-width text table: one row per metric, one column per method.
    pub fn render(&self) -> String {
        let label_width = MetricReport::ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .map(|c| c.method.as_str().len().max(8))
            .collect();
        let mut out = String::new();
        let mut line = format!("{:<label_width$}", "Metric");
        for (c, w) in self.columns.iter().zip(&widths) {
            line.push_str(&format!("  {:>w$}", c.method.as_str()));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        let rule = label_width + widths.iter().map(|w| w + 2).sum::<usize>();
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for (row, name) in MetricReport::ROWS.iter().enumerate() {
            let mut line = format!("{name:<label_width$}");
            for (c, w) in self.columns.iter().zip(&widths) {
                line.push_str(&format!("  {:>w$}", c.metrics.values()[row].to_string()));
            }
            out.push_str(&line);
            out.push('\n');
        }
        for c in &self.columns {
            if let Some(e) = &c.error {
                out.push_str(&format!("{}: {e}\n", c.method));
            }
        }
        out
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
