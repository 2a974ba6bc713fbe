//! Density clustering (HDBSCAN), K-means, and cluster-validity scores.

mod hdbscan;
mod kmeans;
mod mst;
mod validity;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::euclidean;

pub use hdbscan::{hdbscan, CondensedEdge, CondensedTree, HdbscanParams};
pub use kmeans::{kmeans, KmeansModel};
pub use mst::{minimum_spanning_tree, MstEdge};
pub use validity::{dbcv, silhouette};

pub const NOISE: i64 = -1;

/// Per-point cluster label (`-1` = noise) and the number of clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub clusters: usize,
}

impl ClusterLabels {
    /// Renumbers clusters by first appearance in point order.
    pub fn canonical(raw: &[i64]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                if l < 0 {
                    NOISE
                } else {
                    let next = map.len() as i64;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self {
            labels,
            clusters: map.len(),
        }
    }

    pub fn from_assignments(assign: &[usize]) -> Self {
        let raw: Vec<i64> = assign.iter().map(|&a| a as i64).collect();
        Self::canonical(&raw)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster as i64)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Euclidean distance matrix.
pub fn pairwise_distances(points: ArrayView2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| euclidean(points.row(i), points.row(j))).collect())
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])
}

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances(distances: &Array2<f64>, min_samples: usize) -> Vec<f64> {
    let n = distances.nrows();
    assert!(
        min_samples >= 1 && min_samples < n,
        "min_samples must satisfy 1 <= min_samples < n"
    );
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distances[[i, j]]).collect();
            row.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            row[min_samples - 1]
        })
        .collect()
}

/// `max(core_i, core_j, d_ij)`; the diagonal is zero.
pub fn mutual_reachability(distances: &Array2<f64>, core: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(distances.dim(), |(i, j)| {
        if i == j {
            0.0
        } else {
            distances[[i, j]].max(core[i]).max(core[j])
        }
    })
}
