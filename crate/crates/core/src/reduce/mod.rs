//! UMAP: exact kNN graph, fuzzy simplicial set, and SGD layout.

mod layout;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::Metric;
use crate::error::{Error, Result};

pub use layout::{cross_entropy, fit_ab, optimize_layout, optimize_layout_traced, LayoutParams, LowDimLayout};

/// Per point: neighbor indices and distances, ascending, self excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
    pub metric: Metric,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn k(&self) -> usize {
        self.indices.first().map_or(0, Vec::len)
    }
}

/// Exact brute-force k nearest neighbors. Ties go to the lower index.
pub fn knn(points: ArrayView2<f64>, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < n (k={k}, n={n})")));
    }
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (metric.distance(points.row(i), points.row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(d, j)| (j, d)).unzip()
        })
        .collect();
    let (indices, distances) = rows.into_iter().unzip();
    Ok(KnnGraph {
        indices,
        distances,
        metric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rho: f64,
    pub sigma: f64,
}

pub const SMOOTH_TOLERANCE: f64 = 1e-5;
const SMOOTH_ITERATIONS: usize = 64;
const MIN_SIGMA_SCALE: f64 = 1e-3;

/// Membership strength of a neighbor at `distance` from a point.
pub fn membership(distance: f64, cal: Calibration) -> f64 {
    let excess = (distance - cal.rho).max(0.0);
    if excess == 0.0 {
        1.0
    } else if cal.sigma > 0.0 {
        (-excess / cal.sigma).exp()
    } else {
        0.0
    }
}

/// Finds rho (distance to the nearest neighbor, interpolated for fractional
/// `local_connectivity`) and sigma such that the memberships of the k
/// neighbors sum to log2(k).
pub fn smooth_knn(graph: &KnnGraph, local_connectivity: f64) -> Result<Vec<Calibration>> {
    let k = graph.k();
    if k < 2 {
        return Err(Error::invalid("smooth_knn needs at least 2 neighbors"));
    }
    if local_connectivity < 1.0 {
        return Err(Error::invalid("local_connectivity must be at least 1"));
    }
    let target = (k as f64).log2();
    Ok(graph
        .distances
        .iter()
        .map(|dists| {
            let rho = interpolated_rho(dists, local_connectivity);
            let sum = |sigma: f64| -> f64 {
                dists
                    .iter()
                    .map(|&d| membership(d, Calibration { rho, sigma }))
                    .sum()
            };
            let (mut lo, mut hi, mut mid) = (0.0_f64, f64::INFINITY, 1.0_f64);
            for _ in 0..SMOOTH_ITERATIONS {
                let s = sum(mid);
                if (s - target).abs() < SMOOTH_TOLERANCE {
                    break;
                }
                if s > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
                }
            }
            let mean = dists.iter().sum::<f64>() / dists.len() as f64;
            Calibration {
                rho,
                sigma: mid.max(MIN_SIGMA_SCALE * mean),
            }
        })
        .collect())
}

fn interpolated_rho(dists: &[f64], local_connectivity: f64) -> f64 {
    let index = local_connectivity.floor() as usize;
    let frac = local_connectivity - index as f64;
    let at = |i: usize| dists[i.min(dists.len() - 1)];
    if index == 0 {
        return frac * at(0);
    }
    let base = at(index - 1);
    if frac > 0.0 && index < dists.len() {
        base + frac * (at(index) - base)
    } else {
        base
    }
}

/// Probabilistic t-conorm.
pub fn t_conorm(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric fuzzy graph with weights in (0, 1]; edges stored once with
/// `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub calibration: Vec<Calibration>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map_or(0.0, |pos| self.edges[pos].2)
    }
}

pub fn directed_weights(graph: &KnnGraph, calibration: &[Calibration]) -> Vec<(usize, usize, f64)> {
    graph
        .indices
        .iter()
        .zip(&graph.distances)
        .zip(calibration)
        .enumerate()
        .flat_map(|(i, ((idx, dist), &cal))| {
            idx.iter()
                .zip(dist)
                .map(move |(&j, &d)| (i, j, membership(d, cal)))
        })
        .collect()
}

/// Combines directed memberships with the t-conorm `a + b − a·b`.
pub fn fuzzy_union(n: usize, directed: &[(usize, usize, f64)], calibration: Vec<Calibration>) -> FuzzyGraph {
    let mut pairs: std::collections::BTreeMap<(usize, usize), (f64, f64)> = Default::default();
    for &(i, j, a) in directed {
        if i == j {
            continue;
        }
        let slot = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
        if i < j {
            slot.0 = a;
        } else {
            slot.1 = a;
        }
    }
    let edges = pairs
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, t_conorm(a, b)))
        .filter(|e| e.2 > 0.0)
        .collect();
    FuzzyGraph {
        n,
        edges,
        calibration,
    }
}

pub fn fuzzy_graph(graph: &KnnGraph) -> Result<FuzzyGraph> {
    let calibration = smooth_knn(graph, 1.0)?;
    let directed = directed_weights(graph, &calibration);
    Ok(fuzzy_union(graph.len(), &directed, calibration))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmapParams {
    pub neighbors: usize,
    pub metric: Metric,
    pub layout: LayoutParams,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            neighbors: 15,
            metric: Metric::Cosine,
            layout: LayoutParams::default(),
        }
    }
}

/// Full reduction: kNN (k clamped to n−1), fuzzy graph, layout.
pub fn umap(points: ArrayView2<f64>, params: &UmapParams) -> Result<LowDimLayout> {
    let n = points.nrows();
    if n < 3 {
        return Err(Error::invalid(format!("UMAP needs at least 3 points, got {n}")));
    }
    let graph = knn(points, params.neighbors.min(n - 1).max(2), params.metric)?;
    let fuzzy = fuzzy_graph(&graph)?;
    optimize_layout(&fuzzy, &params.layout)
}
