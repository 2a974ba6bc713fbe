//! Embedding providers: a deterministic TF-IDF random-projection baseline,
//! precomputed JSON-lines files, and a remote HTTP service.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ModelUnit;
use crate::error::{Error, Result};

/// n×d matrix, one row per modeled unit, all values finite, d ≥ 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::Format(format!(
                "embedding dimension must be at least 2, got {}",
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite value at row {}",
                pos / values.ncols()
            )));
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Format(format!(
                "row {i} has dimension {}, expected {dim}",
                rows[i].len()
            )));
        }
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((n, dim), flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Baseline,
    File,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub dim: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub batch: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Baseline,
            dim: 128,
            seed: 0,
            endpoint: None,
            path: None,
            batch: 32,
        }
    }
}

impl ProviderConfig {
    pub fn embed(&self, units: &[ModelUnit]) -> Result<EmbeddingMatrix> {
        match self.kind {
            ProviderKind::Baseline => {
                let lemmas: Vec<&[String]> = units.iter().map(|u| u.lemmas.as_slice()).collect();
                embed_baseline(&lemmas, self.dim, self.seed)
            }
            ProviderKind::File => {
                let path = self
                    .path
                    .as_deref()
                    .ok_or_else(|| Error::invalid("file provider needs a path"))?;
                load_embeddings(path, units.len())
            }
            ProviderKind::Remote => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::invalid("remote provider needs an endpoint"))?;
                let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
                fetch_embeddings(endpoint, &texts, self.batch)
            }
        }
    }
}

/// TF-IDF weights `ln(1+tf)·ln(N/df)` projected to `dim` dimensions by a
/// seeded sparse random projection with entries in {−1, 0, +1} and density
/// `1/√V`.
pub fn embed_baseline<S: AsRef<str>>(units: &[&[S]], dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if dim < 2 {
        return Err(Error::invalid("embedding dimension must be at least 2"));
    }
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for lemma in units.iter().flat_map(|u| u.iter()) {
        vocab.insert(lemma.as_ref(), 0);
    }
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    for (i, slot) in vocab.values_mut().enumerate() {
        *slot = i;
    }
    let v = vocab.len();
    let n = units.len();

    let tf: Vec<BTreeMap<usize, f64>> = units
        .iter()
        .map(|u| {
            let mut counts = BTreeMap::new();
            for lemma in u.iter() {
                *counts.entry(vocab[lemma.as_ref()]).or_insert(0.0) += 1.0;
            }
            counts
        })
        .collect();
    let mut df = vec![0usize; v];
    for counts in &tf {
        for &w in counts.keys() {
            df[w] += 1;
        }
    }
    let idf: Vec<f64> = df.iter().map(|&d| (n as f64 / d as f64).ln()).collect();

    let density = 1.0 / (v as f64).sqrt();
    let scale = 1.0 / (density * dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut projection = Array2::<f64>::zeros((v, dim));
    for x in projection.iter_mut() {
        let u: f64 = rng.random();
        *x = if u < density / 2.0 {
            -scale
        } else if u < density {
            scale
        } else {
            0.0
        };
    }

    let mut out = Array2::<f64>::zeros((n, dim));
    for (mut row, counts) in out.axis_iter_mut(Axis(0)).zip(&tf) {
        for (&w, &count) in counts {
            let weight = (1.0 + count).ln() * idf[w];
            if weight != 0.0 {
                row.scaled_add(weight, &projection.row(w));
            }
        }
    }
    EmbeddingMatrix::new(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingLine {
    pub index: usize,
    pub vector: Vec<f64>,
}

/// Reads JSON lines `{"index": i, "vector": [...]}` and orders rows by index.
pub fn load_embeddings(path: &Path, expected_rows: usize) -> Result<EmbeddingMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (no, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EmbeddingLine = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", no + 1)))?;
        if rows.insert(parsed.index, parsed.vector).is_some() {
            return Err(Error::Alignment(format!("duplicate index {}", parsed.index)));
        }
    }
    if rows.len() != expected_rows {
        return Err(Error::Alignment(format!(
            "file has {} rows, corpus has {expected_rows} modeled units",
            rows.len()
        )));
    }
    if let Some((pos, _)) = rows.keys().enumerate().find(|(i, k)| i != *k) {
        return Err(Error::Alignment(format!("missing index {pos}")));
    }
    EmbeddingMatrix::from_rows(rows.into_values().collect())
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (index, row) in matrix.values().rows().into_iter().enumerate() {
        let line = EmbeddingLine {
            index,
            vector: row.to_vec(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Posts `texts` to `endpoint` in batches of `batch`, preserving order.
pub fn fetch_embeddings(endpoint: &str, texts: &[&str], batch: usize) -> Result<EmbeddingMatrix> {
    if batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
    let mut dim: Option<usize> = None;
    for chunk in texts.chunks(batch) {
        let mut response = agent
            .post(endpoint)
            .send_json(EmbedRequest { texts: chunk })
            .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
        let body: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Format(format!("bad response body: {e}")))?;
        if body.vectors.len() != chunk.len() {
            return Err(Error::Format(format!(
                "sent {} texts, received {} vectors",
                chunk.len(),
                body.vectors.len()
            )));
        }
        for vector in body.vectors {
            match dim {
                Some(d) if d != vector.len() => {
                    return Err(Error::Format(format!(
                        "inconsistent dimensions: {d} then {}",
                        vector.len()
                    )))
                }
                _ => dim = Some(vector.len()),
            }
            rows.push(vector);
        }
    }
    EmbeddingMatrix::from_rows(rows)
}
