use ndarray::{Array2, ArrayView2};

use super::mst::minimum_spanning_tree;
use super::{pairwise_distances, ClusterLabels};
use crate::error::{Error, Result};

fn groups(labels: &ClusterLabels) -> Vec<Vec<usize>> {
    (0..labels.clusters)
        .map(|c| labels.members(c))
        .filter(|m| !m.is_empty())
        .collect()
}

/// Mean silhouette over non-noise points. A point alone in its cluster
/// scores 0.
pub fn silhouette(points: ArrayView2<f64>, labels: &ClusterLabels) -> Result<f64> {
    let clusters = groups(labels);
    if clusters.len() < 2 {
        return Err(Error::MetricUndefined("silhouette needs at least two clusters"));
    }
    let dist = pairwise_distances(points);
    let mean_to = |i: usize, members: &[usize]| -> f64 {
        let others: Vec<usize> = members.iter().copied().filter(|&j| j != i).collect();
        others.iter().map(|&j| dist[[i, j]]).sum::<f64>() / others.len() as f64
    };
    let mut total = 0.0;
    let mut count = 0usize;
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            count += 1;
            if members.len() == 1 {
                continue;
            }
            let a = mean_to(i, members);
            let b = clusters
                .iter()
                .enumerate()
                .filter(|(o, _)| *o != c)
                .map(|(_, m)| mean_to(i, m))
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    Ok(total / count as f64)
}

/// All-points core distance of every member of one cluster in `dim`
/// dimensions, computed in log space.
fn all_points_core(dist: &Array2<f64>, members: &[usize], dim: usize) -> Vec<f64> {
    let d = dim as f64;
    members
        .iter()
        .map(|&i| {
            let others: Vec<f64> = members.iter().filter(|&&j| j != i).map(|&j| dist[[i, j]]).collect();
            if others.is_empty() {
                return 0.0;
            }
            if others.iter().any(|&x| x == 0.0) {
                return 0.0;
            }
            // ln Σ (1/x)^d  via log-sum-exp
            let logs: Vec<f64> = others.iter().map(|&x| -d * x.ln()).collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logs.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
            let log_mean = lse - (others.len() as f64).ln();
            (-log_mean / d).exp()
        })
        .collect()
}

struct ClusterShape {
    /// Members whose MST degree is at least 2, or every member if none are.
    internal: Vec<usize>,
    sparseness: f64,
}

/// Density-based clustering validation. Noise points count toward the total
/// used to weight clusters; all-noise input scores 0.
pub fn dbcv(points: ArrayView2<f64>, labels: &ClusterLabels) -> Result<f64> {
    let clusters = groups(labels);
    if clusters.is_empty() {
        return Ok(0.0);
    }
    if clusters.len() < 2 {
        return Err(Error::MetricUndefined("DBCV needs at least two clusters"));
    }
    let n = points.nrows();
    let dim = points.ncols();
    let dist = pairwise_distances(points);
    let mut core = vec![0.0; n];
    for members in &clusters {
        for (&i, c) in members.iter().zip(all_points_core(&dist, members, dim)) {
            core[i] = c;
        }
    }
    let mreach = |i: usize, j: usize| dist[[i, j]].max(core[i]).max(core[j]);

    let shapes: Vec<ClusterShape> = clusters
        .iter()
        .map(|members| {
            let m = members.len();
            let tree = minimum_spanning_tree(m, |a, b| mreach(members[a], members[b]));
            let mut degree = vec![0usize; m];
            for e in &tree {
                degree[e.a] += 1;
                degree[e.b] += 1;
            }
            let internal_edges: Vec<f64> = tree
                .iter()
                .filter(|e| degree[e.a] > 1 && degree[e.b] > 1)
                .map(|e| e.weight)
                .collect();
            let sparseness = if internal_edges.is_empty() {
                tree.iter().map(|e| e.weight).fold(0.0, f64::max)
            } else {
                internal_edges.into_iter().fold(0.0, f64::max)
            };
            let mut internal: Vec<usize> = (0..m).filter(|&a| degree[a] > 1).map(|a| members[a]).collect();
            if internal.is_empty() {
                internal = members.clone();
            }
            ClusterShape { internal, sparseness }
        })
        .collect();

    let mut score = 0.0;
    for (c, shape) in shapes.iter().enumerate() {
        let separation = shapes
            .iter()
            .enumerate()
            .filter(|(o, _)| *o != c)
            .flat_map(|(_, other)| {
                shape
                    .internal
                    .iter()
                    .flat_map(move |&i| other.internal.iter().map(move |&j| (i, j)))
            })
            .map(|(i, j)| mreach(i, j))
            .fold(f64::INFINITY, f64::min);
        let denom = separation.max(shape.sparseness);
        let validity = if denom > 0.0 {
            (separation - shape.sparseness) / denom
        } else {
            0.0
        };
        score += clusters[c].len() as f64 / n as f64 * validity;
    }
    Ok(score)
}
