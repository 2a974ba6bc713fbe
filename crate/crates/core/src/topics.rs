//! Keyword topics from cluster labels: class-based TF-IDF scoring, pairwise
//! topic reduction and topic diversity.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterLabels, NOISE};
use crate::distance::cosine_similarity;
use crate::error::{Error, Result};
use crate::lda::top_weighted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub lemma: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: usize,
    /// Sorted by weight descending, ties by lemma.
    pub keywords: Vec<Keyword>,
    /// Indices of the modeled units assigned to this topic.
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<Vec<f64>>,
}

impl Topic {
    pub fn lemmas(&self) -> Vec<&str> {
        self.keywords.iter().map(|k| k.lemma.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModelResult {
    pub method: String,
    pub topics: Vec<Topic>,
    /// Topic id per modeled unit, `-1` for noise.
    pub assignments: Vec<i64>,
    pub noise: Vec<usize>,
}

impl TopicModelResult {
    pub fn labels(&self) -> ClusterLabels {
        ClusterLabels::canonical(&self.assignments)
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.assignments.is_empty() {
            0.0
        } else {
            self.noise.len() as f64 / self.assignments.len() as f64
        }
    }
}

/// c-TF-IDF score of every lemma in every cluster:
/// `(tf / cluster tokens) * ln(1 + C / cf)`.
pub fn ctfidf<S: AsRef<str>>(labels: &ClusterLabels, units: &[&[S]]) -> Vec<BTreeMap<String, f64>> {
    let c = labels.clusters;
    let mut tf: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); c];
    let mut tokens = vec![0usize; c];
    for (unit, &label) in units.iter().zip(&labels.labels) {
        if label == NOISE {
            continue;
        }
        let k = label as usize;
        for lemma in unit.iter() {
            *tf[k].entry(lemma.as_ref()).or_default() += 1;
            tokens[k] += 1;
        }
    }
    let mut cf: BTreeMap<&str, usize> = BTreeMap::new();
    for counts in &tf {
        for lemma in counts.keys() {
            *cf.entry(lemma).or_default() += 1;
        }
    }
    tf.iter()
        .zip(&tokens)
        .map(|(counts, &total)| {
            counts
                .iter()
                .map(|(&lemma, &n)| {
                    let idf = (1.0 + c as f64 / cf[lemma] as f64).ln();
                    (lemma.to_string(), n as f64 / total as f64 * idf)
                })
                .collect()
        })
        .collect()
}

fn centroid(features: ArrayView2<f64>, members: &[usize]) -> Vec<f64> {
    let mut sum = vec![0.0; features.ncols()];
    for &i in members {
        for (s, x) in sum.iter_mut().zip(features.row(i)) {
            *s += x;
        }
    }
    sum.iter().map(|s| s / members.len() as f64).collect()
}

/// Builds one topic per cluster with its top-`m` c-TF-IDF keywords. Topic
/// ids follow the cluster ids of `labels`; centroids are taken from
/// `features` when given.
pub fn assemble_topics<S: AsRef<str>>(
    labels: &ClusterLabels,
    units: &[&[S]],
    m: usize,
    features: Option<ArrayView2<f64>>,
) -> Result<TopicModelResult> {
    if labels.labels.len() != units.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} units",
            labels.labels.len(),
            units.len()
        )));
    }
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if labels.clusters == 0 {
        return Err(Error::NoTopics);
    }
    let scores = ctfidf(labels, units);
    let topics = scores
        .iter()
        .enumerate()
        .map(|(id, table)| {
            let members = labels.members(id);
            Topic {
                id,
                keywords: top_weighted(table.iter().map(|(w, &s)| (w.as_str(), s)), m)
                    .into_iter()
                    .map(|(lemma, weight)| Keyword { lemma, weight })
                    .collect(),
                centroid: features.map(|f| centroid(f, &members)),
                members,
            }
        })
        .collect();
    Ok(TopicModelResult {
        method: String::new(),
        topics,
        assignments: labels.labels.clone(),
        noise: (0..labels.labels.len())
            .filter(|&i| labels.labels[i] == NOISE)
            .collect(),
    })
}

/// One merge step: `absorbed` joined `survivor` at the given similarity.
/// Ids refer to the numbering before the merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub survivor: usize,
    pub absorbed: usize,
    pub similarity: f64,
}

/// Repeatedly merges the two topics with the most similar centroids (ties to
/// the lowest id pair) until at most `target` remain, then renumbers.
/// Keywords and centroids are recomputed from the pooled members.
pub fn reduce_topics<S: AsRef<str>>(
    result: &TopicModelResult,
    target: usize,
    units: &[&[S]],
    features: ArrayView2<f64>,
    m: usize,
) -> Result<(TopicModelResult, Vec<Merge>)> {
    if target == 0 {
        return Err(Error::invalid("target topic count must be at least 1"));
    }
    let mut labels = result.assignments.clone();
    let mut merges = Vec::new();
    loop {
        let current = ClusterLabels::canonical(&labels);
        if current.clusters <= target {
            let mut reduced = assemble_topics(&current, units, m, Some(features))?;
            reduced.method = result.method.clone();
            return Ok((reduced, merges));
        }
        let centroids: Vec<Vec<f64>> = (0..current.clusters)
            .map(|c| centroid(features, &current.members(c)))
            .collect();
        let mut best = (0, 1, f64::NEG_INFINITY);
        for i in 0..centroids.len() {
            for j in (i + 1)..centroids.len() {
                let s = cosine_similarity(
                    ndarray::ArrayView1::from(&centroids[i]),
                    ndarray::ArrayView1::from(&centroids[j]),
                );
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }
        let (survivor, absorbed, similarity) = best;
        merges.push(Merge {
            survivor,
            absorbed,
            similarity,
        });
        labels = current
            .labels
            .iter()
            .map(|&l| if l == absorbed as i64 { survivor as i64 } else { l })
            .collect();
    }
}

/// Share of distinct lemmas among every topic's top-`k` keywords. `k` is
/// clamped to the shortest keyword list.
pub fn topic_diversity(result: &TopicModelResult, k: usize) -> Result<f64> {
    if result.topics.is_empty() {
        return Err(Error::NoTopics);
    }
    let shortest = result.topics.iter().map(|t| t.keywords.len()).min().unwrap_or(0);
    if shortest == 0 {
        return Err(Error::invalid("every topic needs at least one keyword"));
    }
    let k = k.clamp(1, shortest);
    let unique: BTreeSet<&str> = result
        .topics
        .iter()
        .flat_map(|t| t.keywords[..k].iter().map(|kw| kw.lemma.as_str()))
        .collect();
    Ok(unique.len() as f64 / (k * result.topics.len()) as f64)
}
