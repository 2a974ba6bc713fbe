//! Corpus-based topic coherence (UMass, UCI, NPMI, C_v) over boolean
//! sliding-window co-occurrence counts, and the metric report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const EPSILON: f64 = 1e-12;
pub const PMI_WINDOW: usize = 10;
pub const CV_WINDOW: usize = 110;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CooccurrenceCounts {
    pub window: usize,
    /// Total number of windows.
    pub windows: usize,
    pub word: BTreeMap<String, usize>,
    /// Keyed by the lexicographically ordered pair.
    pub pair: BTreeMap<(String, String), usize>,
}

impl CooccurrenceCounts {
    pub fn count(&self, w: &str) -> usize {
        self.word.get(w).copied().unwrap_or(0)
    }

    pub fn joint(&self, a: &str, b: &str) -> usize {
        if a == b {
            return self.count(a);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pair
            .get(&(key.0.to_string(), key.1.to_string()))
            .copied()
            .unwrap_or(0)
    }

    fn prob(&self, n: usize) -> f64 {
        n as f64 / self.windows as f64
    }
}

/// Slides a window of `window` tokens (stride 1) over every unit; a unit no
/// longer than the window is one window. Only words in `filter` are counted
/// when it is given.
pub fn count_windows<S: AsRef<str>>(
    units: &[&[S]],
    window: usize,
    filter: Option<&BTreeSet<String>>,
) -> CooccurrenceCounts {
    let window = window.max(1);
    let mut counts = CooccurrenceCounts {
        window,
        ..Default::default()
    };
    for unit in units {
        if unit.is_empty() {
            continue;
        }
        let spans = if unit.len() <= window {
            1
        } else {
            unit.len() - window + 1
        };
        for start in 0..spans {
            let end = (start + window).min(unit.len());
            let present: BTreeSet<&str> = unit[start..end]
                .iter()
                .map(|w| w.as_ref())
                .filter(|w| filter.is_none_or(|f| f.contains(*w)))
                .collect();
            counts.windows += 1;
            let words: Vec<&str> = present.into_iter().collect();
            for (i, a) in words.iter().enumerate() {
                *counts.word.entry(a.to_string()).or_default() += 1;
                for b in &words[i + 1..] {
                    *counts.pair.entry((a.to_string(), b.to_string())).or_default() += 1;
                }
            }
        }
    }
    counts
}

/// Counts where every unit is one document.
pub fn document_counts<S: AsRef<str>>(units: &[&[S]], filter: Option<&BTreeSet<String>>) -> CooccurrenceCounts {
    let longest = units.iter().map(|u| u.len()).max().unwrap_or(1);
    let mut counts = count_windows(units, longest, filter);
    counts.window = 0;
    counts
}

fn mean(values: &[f64], what: &'static str) -> Result<f64> {
    if values.is_empty() {
        Err(Error::MetricUndefined(what))
    } else {
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn need_pairs(keywords: &[&str]) -> Result<()> {
    if keywords.len() < 2 {
        Err(Error::MetricUndefined("coherence needs at least two keywords"))
    } else {
        Ok(())
    }
}

/// Mean of `ln((D(w_i, w_j) + 1) / D(w_j))` over `i > j`, with keywords in
/// descending weight order. Pairs with `D(w_j) = 0` are skipped.
pub fn umass(keywords: &[&str], doc_counts: &CooccurrenceCounts) -> Result<f64> {
    need_pairs(keywords)?;
    let mut scores = Vec::new();
    for i in 1..keywords.len() {
        for j in 0..i {
            let dj = doc_counts.count(keywords[j]);
            if dj == 0 {
                tracing::debug!(word = keywords[j], "umass pair skipped: word absent");
                continue;
            }
            let dij = doc_counts.joint(keywords[i], keywords[j]);
            scores.push(((dij as f64 + 1.0) / dj as f64).ln());
        }
    }
    mean(&scores, "no UMass pair has a present conditioning word")
}

fn pmi_parts(a: &str, b: &str, counts: &CooccurrenceCounts) -> Option<(f64, f64)> {
    let (da, db) = (counts.count(a), counts.count(b));
    if da == 0 || db == 0 || counts.windows == 0 {
        return None;
    }
    let pij = counts.prob(counts.joint(a, b)) + EPSILON;
    let pmi = (pij / (counts.prob(da) * counts.prob(db))).ln();
    Some((pmi, -pij.ln()))
}

fn npmi_value(a: &str, b: &str, counts: &CooccurrenceCounts) -> Option<f64> {
    pmi_parts(a, b, counts).map(|(pmi, denom)| {
        if denom <= 0.0 {
            1.0
        } else {
            (pmi / denom).clamp(-1.0, 1.0)
        }
    })
}

fn unordered_mean(
    keywords: &[&str],
    counts: &CooccurrenceCounts,
    what: &'static str,
    f: impl Fn(&str, &str) -> Option<f64>,
) -> Result<f64> {
    need_pairs(keywords)?;
    let mut scores = Vec::new();
    for i in 0..keywords.len() {
        for j in (i + 1)..keywords.len() {
            match f(keywords[i], keywords[j]) {
                Some(s) => scores.push(s),
                None => tracing::debug!(a = keywords[i], b = keywords[j], window = counts.window, "pair skipped"),
            }
        }
    }
    mean(&scores, what)
}

/// Mean pointwise mutual information over unordered pairs.
pub fn uci(keywords: &[&str], counts: &CooccurrenceCounts) -> Result<f64> {
    unordered_mean(keywords, counts, "no UCI pair has both words present", |a, b| {
        pmi_parts(a, b, counts).map(|p| p.0)
    })
}

/// Mean normalized PMI over unordered pairs, each in `[-1, 1]`.
pub fn npmi(keywords: &[&str], counts: &CooccurrenceCounts) -> Result<f64> {
    unordered_mean(keywords, counts, "no NPMI pair has both words present", |a, b| {
        npmi_value(a, b, counts)
    })
}

/// C_v with one-set segmentation: each keyword's NPMI context vector against
/// all keywords is compared by cosine with the summed vector of the set.
/// Absent words contribute zero entries; a zero vector gives cosine 0.
pub fn c_v(keywords: &[&str], counts: &CooccurrenceCounts) -> Result<f64> {
    need_pairs(keywords)?;
    let vectors: Vec<Vec<f64>> = keywords
        .iter()
        .map(|a| {
            keywords
                .iter()
                .map(|b| npmi_value(a, b, counts).unwrap_or(0.0))
                .collect()
        })
        .collect();
    let total: Vec<f64> = (0..keywords.len())
        .map(|j| vectors.iter().map(|v| v[j]).sum())
        .collect();
    let cosines: Vec<f64> = vectors
        .iter()
        .map(|v| {
            let dot: f64 = v.iter().zip(&total).map(|(x, y)| x * y).sum();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nt = total.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv == 0.0 || nt == 0.0 {
                0.0
            } else {
                dot / (nv * nt)
            }
        })
        .collect();
    mean(&cosines, "no C_v segment")
}

/// A metric value or "NA" when undefined for the method or the data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MetricValue {
    Value(f64),
    #[default]
    Na,
}

impl MetricValue {
    pub fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => MetricValue::Value(v),
            _ => MetricValue::Na,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(v),
            MetricValue::Na => None,
        }
    }

    pub fn is_na(self) -> bool {
        self == MetricValue::Na
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Value(v) => write!(f, "{v:.3}"),
            MetricValue::Na => f.write_str("NA"),
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MetricValue::Value(v) => s.serialize_f64(*v),
            MetricValue::Na => s.serialize_str("NA"),
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MetricValue::Value(v)),
            Raw::Text(t) if t == "NA" => Ok(MetricValue::Na),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"NA\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub c_v: MetricValue,
    pub umass: MetricValue,
    pub npmi: MetricValue,
    pub uci: MetricValue,
    pub topic_diversity: MetricValue,
    pub silhouette: MetricValue,
    pub dbcv: MetricValue,
}

impl MetricReport {
    /// Rows in display order.
    pub const ROWS: [&'static str; 7] = ["C_v", "UMass", "NPMI", "UCI", "Topic diversity", "Silhouette", "DBCV"];

    pub fn values(&self) -> [MetricValue; 7] {
        [
            self.c_v,
            self.umass,
            self.npmi,
            self.uci,
            self.topic_diversity,
            self.silhouette,
            self.dbcv,
        ]
    }
}

/// Per-topic mean of each coherence metric, counted over the units
/// themselves. Topics where a metric is undefined are left out of its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceScores {
    pub c_v: MetricValue,
    pub umass: MetricValue,
    pub npmi: MetricValue,
    pub uci: MetricValue,
}

pub fn coherence_scores<S: AsRef<str>>(topics: &[Vec<&str>], units: &[&[S]]) -> CoherenceScores {
    let vocab: BTreeSet<String> = topics.iter().flatten().map(|w| w.to_string()).collect();
    let docs = document_counts(units, Some(&vocab));
    let pmi = count_windows(units, PMI_WINDOW, Some(&vocab));
    let cv = count_windows(units, CV_WINDOW, Some(&vocab));
    let average = |f: &dyn Fn(&[&str]) -> Result<f64>| {
        let vals: Vec<f64> = topics.iter().filter_map(|t| f(t).ok()).collect();
        MetricValue::from_result(mean(&vals, "undefined for every topic"))
    };
    CoherenceScores {
        c_v: average(&|t| c_v(t, &cv)),
        umass: average(&|t| umass(t, &docs)),
        npmi: average(&|t| npmi(t, &pmi)),
        uci: average(&|t| uci(t, &pmi)),
    }
}
