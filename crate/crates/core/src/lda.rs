//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    /// Symmetric document–topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(topics: usize, seed: u64) -> Self {
        Self {
            topics,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub vocab: Vec<String>,
    /// K×V topic–word distribution.
    pub phi: Array2<f64>,
    /// D×K unit–topic distribution.
    pub theta: Array2<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl LdaModel {
    pub fn num_topics(&self) -> usize {
        self.phi.nrows()
    }

    /// The `m` highest-probability words of a topic, ties broken by word.
    pub fn top_keywords(&self, topic: usize, m: usize) -> Result<Vec<(String, f64)>> {
        if topic >= self.num_topics() {
            return Err(Error::invalid(format!(
                "topic {topic} out of range for {} topics",
                self.num_topics()
            )));
        }
        if m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        Ok(top_weighted(
            self.vocab.iter().map(String::as_str).zip(self.phi.row(topic).iter().copied()),
            m,
        ))
    }

    /// The unit–topic matrix used as features by the hybrid pipelines.
    pub fn features(&self) -> &Array2<f64> {
        &self.theta
    }

    /// Index of the most probable topic for each unit (lowest index on ties).
    pub fn assignments(&self) -> Vec<usize> {
        self.theta
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                    .0
            })
            .collect()
    }
}

/// Sorts by weight descending then word ascending and keeps the first `m`.
pub(crate) fn top_weighted<'a>(
    items: impl Iterator<Item = (&'a str, f64)>,
    m: usize,
) -> Vec<(String, f64)> {
    let mut all: Vec<(&str, f64)> = items.collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.into_iter()
        .take(m)
        .map(|(w, p)| (w.to_string(), p))
        .collect()
}

/// Collapsed Gibbs sampler state. [`fit_lda`] drives it; it is public so the
/// per-sweep invariants can be observed.
pub struct GibbsSampler {
    vocab: Vec<String>,
    docs: Vec<Vec<usize>>,
    assignment: Vec<Vec<usize>>,
    doc_topic: Array2<u32>,
    topic_word: Array2<u32>,
    topic_total: Vec<u32>,
    alpha: f64,
    beta: f64,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    params: LdaParams,
}

impl GibbsSampler {
    pub fn new<S: AsRef<str>>(units: &[&[S]], params: LdaParams) -> Result<Self> {
        let k = params.topics;
        if k == 0 {
            return Err(Error::invalid("topic count must be at least 1"));
        }
        if params.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if k > units.len() {
            return Err(Error::TooFewDocuments {
                units: units.len(),
                topics: k,
            });
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for w in units.iter().flat_map(|u| u.iter()) {
            index.insert(w.as_ref(), 0);
        }
        if index.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        for (i, slot) in index.values_mut().enumerate() {
            *slot = i;
        }
        let vocab: Vec<String> = index.keys().map(|w| w.to_string()).collect();
        let docs: Vec<Vec<usize>> = units
            .iter()
            .map(|u| u.iter().map(|w| index[w.as_ref()]).collect())
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut doc_topic = Array2::<u32>::zeros((docs.len(), k));
        let mut topic_word = Array2::<u32>::zeros((k, vocab.len()));
        let mut topic_total = vec![0u32; k];
        let assignment = docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let z = rng.random_range(0..k);
                        doc_topic[[d, z]] += 1;
                        topic_word[[z, w]] += 1;
                        topic_total[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            vocab,
            docs,
            assignment,
            doc_topic,
            topic_word,
            topic_total,
            alpha: params.alpha(),
            beta: params.beta,
            rng,
            probs: vec![0.0; k],
            params,
        })
    }

    /// One pass over every token in corpus order.
    pub fn sweep(&mut self) {
        let k = self.topic_total.len();
        let vbeta = self.vocab.len() as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignment[d][i];
                self.doc_topic[[d, old]] -= 1;
                self.topic_word[[old, w]] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[[d, t]] as f64 + self.alpha)
                        * (self.topic_word[[t, w]] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.probs[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignment[d][i] = new;
                self.doc_topic[[d, new]] += 1;
                self.topic_word[[new, w]] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Checks that all count tables agree with the current assignments.
    pub fn counts_consistent(&self) -> bool {
        let tokens = self.token_count() as u64;
        let tw: u64 = self.topic_word.iter().map(|&c| c as u64).sum();
        let dt: u64 = self.doc_topic.iter().map(|&c| c as u64).sum();
        let tt: u64 = self.topic_total.iter().map(|&c| c as u64).sum();
        if tw != tokens || dt != tokens || tt != tokens {
            return false;
        }
        let rows_match = self
            .topic_word
            .rows()
            .into_iter()
            .zip(&self.topic_total)
            .all(|(row, &t)| row.iter().map(|&c| c as u64).sum::<u64>() == t as u64);
        let docs_match = self
            .doc_topic
            .rows()
            .into_iter()
            .zip(&self.docs)
            .all(|(row, doc)| row.iter().map(|&c| c as usize).sum::<usize>() == doc.len());
        rows_match && docs_match
    }

    fn phi(&self) -> Array2<f64> {
        let vbeta = self.vocab.len() as f64 * self.beta;
        let mut phi = self.topic_word.mapv(|c| c as f64 + self.beta);
        for (mut row, &t) in phi.rows_mut().into_iter().zip(&self.topic_total) {
            row /= t as f64 + vbeta;
        }
        phi
    }

    fn theta(&self) -> Array2<f64> {
        let kalpha = self.topic_total.len() as f64 * self.alpha;
        let mut theta = self.doc_topic.mapv(|c| c as f64 + self.alpha);
        for (mut row, doc) in theta.rows_mut().into_iter().zip(&self.docs) {
            row /= doc.len() as f64 + kalpha;
        }
        theta
    }

    /// Σ over tokens of ln Σ_k θ_dk φ_kw under the current counts.
    pub fn log_likelihood(&self) -> f64 {
        let phi = self.phi();
        let theta = self.theta();
        self.docs
            .iter()
            .enumerate()
            .flat_map(|(d, words)| words.iter().map(move |&w| (d, w)))
            .map(|(d, w)| theta.row(d).dot(&phi.column(w)).ln())
            .sum()
    }

    pub fn into_model(self) -> LdaModel {
        LdaModel {
            phi: self.phi(),
            theta: self.theta(),
            vocab: self.vocab,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.params.seed,
            iterations: self.params.iterations,
        }
    }
}

pub fn fit_lda<S: AsRef<str>>(units: &[&[S]], params: LdaParams) -> Result<LdaModel> {
    let mut sampler = GibbsSampler::new(units, params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}
