use std::collections::VecDeque;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::mst::minimum_spanning_tree;
use super::{core_distances, pairwise_distances, ClusterLabels, NOISE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    pub min_samples: Option<usize>,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            min_samples: None,
        }
    }
}

/// One edge of the condensed tree. Children below `n_points` are points;
/// cluster ids start at `n_points` (the root).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub edges: Vec<CondensedEdge>,
    /// Stability per cluster, indexed by `cluster_id - n_points`.
    pub stability: Vec<f64>,
    /// Selected cluster ids, ascending.
    pub selected: Vec<usize>,
}

impl CondensedTree {
    pub fn root(&self) -> usize {
        self.n_points
    }

    pub fn cluster_count(&self) -> usize {
        self.stability.len()
    }

    pub fn children(&self, cluster: usize) -> impl Iterator<Item = &CondensedEdge> {
        self.edges
            .iter()
            .filter(move |e| e.parent == cluster && e.child >= self.n_points)
    }

    /// Lambda at which `cluster` split off its parent (0 for the root).
    pub fn birth(&self, cluster: usize) -> f64 {
        self.edges
            .iter()
            .find(|e| e.child == cluster)
            .map_or(0.0, |e| e.lambda)
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// `lambda − birth`, treating equal (possibly infinite) values as zero.
pub(crate) fn persistence(lambda: f64, birth: f64) -> f64 {
    if lambda == birth {
        0.0
    } else {
        lambda - birth
    }
}

struct Dendrogram {
    /// Internal node `i` is id `n + i`: (left, right, distance, size).
    nodes: Vec<(usize, usize, f64, usize)>,
    n: usize,
}

impl Dendrogram {
    fn size(&self, id: usize) -> usize {
        if id < self.n {
            1
        } else {
            self.nodes[id - self.n].3
        }
    }

    fn leaves(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                let (l, r, _, _) = self.nodes[x - self.n];
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }
}

fn single_linkage(n: usize, edges: &[super::MstEdge]) -> Dendrogram {
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut nodes = Vec::with_capacity(n.saturating_sub(1));
    let mut size = vec![1usize; 2 * n];
    for e in edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        let id = n + nodes.len();
        parent[ra] = id;
        parent[rb] = id;
        size[id] = size[ra] + size[rb];
        nodes.push((ra, rb, e.weight, size[id]));
    }
    Dendrogram { nodes, n }
}

fn condense(d: &Dendrogram, min_cluster_size: usize) -> (Vec<CondensedEdge>, usize) {
    let n = d.n;
    let mut edges = Vec::new();
    let mut next_label = n + 1;
    let mut queue = VecDeque::new();
    if let Some(root) = (n >= 2).then(|| n + d.nodes.len() - 1) {
        queue.push_back((root, n));
    }
    while let Some((node, cluster)) = queue.pop_front() {
        let (left, right, dist, _) = d.nodes[node - n];
        let lambda = lambda_of(dist);
        let (ls, rs) = (d.size(left), d.size(right));
        let fall_out = |sub: usize, edges: &mut Vec<CondensedEdge>| {
            for p in d.leaves(sub) {
                edges.push(CondensedEdge {
                    parent: cluster,
                    child: p,
                    lambda,
                    child_size: 1,
                });
            }
        };
        match (ls >= min_cluster_size, rs >= min_cluster_size) {
            (true, true) => {
                for (sub, size) in [(left, ls), (right, rs)] {
                    edges.push(CondensedEdge {
                        parent: cluster,
                        child: next_label,
                        lambda,
                        child_size: size,
                    });
                    queue.push_back((sub, next_label));
                    next_label += 1;
                }
            }
            (true, false) => {
                fall_out(right, &mut edges);
                queue.push_back((left, cluster));
            }
            (false, true) => {
                fall_out(left, &mut edges);
                queue.push_back((right, cluster));
            }
            (false, false) => {
                fall_out(left, &mut edges);
                fall_out(right, &mut edges);
            }
        }
    }
    (edges, next_label - n)
}

fn stabilities(n: usize, clusters: usize, edges: &[CondensedEdge]) -> Vec<f64> {
    let mut birth = vec![0.0; clusters];
    for e in edges.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
    }
    let mut stability = vec![0.0; clusters];
    for e in edges {
        let c = e.parent - n;
        stability[c] += persistence(e.lambda, birth[c]) * e.child_size as f64;
    }
    stability
}

/// Excess-of-mass selection. A leaf is always a candidate; an internal
/// cluster is kept only when its stability exceeds the best total of its
/// descendants. The root is selected only when it never splits.
fn select(n: usize, clusters: usize, edges: &[CondensedEdge], stability: &[f64]) -> Vec<usize> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for e in edges.iter().filter(|e| e.child >= n) {
        children[e.parent - n].push(e.child - n);
    }
    if clusters == 1 {
        return vec![n];
    }
    let mut value = vec![0.0; clusters];
    let mut selected = vec![false; clusters];
    // children always carry larger ids than their parent
    for c in (1..clusters).rev() {
        if children[c].is_empty() {
            selected[c] = true;
            value[c] = stability[c];
            continue;
        }
        let below: f64 = children[c].iter().map(|&k| value[k]).sum();
        if stability[c] > below {
            selected[c] = true;
            value[c] = stability[c];
            let mut stack = children[c].clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend(children[k].iter().copied());
            }
        } else {
            value[c] = below;
        }
    }
    (1..clusters).filter(|&c| selected[c]).map(|c| c + n).collect()
}

pub fn hdbscan(points: ArrayView2<f64>, params: HdbscanParams) -> Result<(ClusterLabels, CondensedTree)> {
    let n = points.nrows();
    let mcs = params.min_cluster_size;
    let min_samples = params.min_samples.unwrap_or(mcs);
    if mcs < 2 {
        return Err(Error::invalid("min_cluster_size must be at least 2"));
    }
    if n < mcs {
        return Err(Error::invalid(format!(
            "{n} points is fewer than min_cluster_size {mcs}"
        )));
    }
    if min_samples == 0 || min_samples >= n {
        return Err(Error::invalid(format!(
            "min_samples must satisfy 1 <= min_samples < n (min_samples={min_samples}, n={n})"
        )));
    }

    let dist = pairwise_distances(points);
    let core = core_distances(&dist, min_samples);
    let mst = minimum_spanning_tree(n, |i, j| dist[[i, j]].max(core[i]).max(core[j]));
    let dendrogram = single_linkage(n, &mst);
    let (edges, clusters) = condense(&dendrogram, mcs);
    let stability = stabilities(n, clusters, &edges);
    let selected = select(n, clusters, &edges, &stability);

    // nearest selected ancestor (or self) of every cluster
    let mut owner: Vec<Option<usize>> = vec![None; clusters];
    let mut parent_of = vec![None; clusters];
    for e in edges.iter().filter(|e| e.child >= n) {
        parent_of[e.child - n] = Some(e.parent - n);
    }
    for c in 0..clusters {
        if selected.contains(&(c + n)) {
            owner[c] = Some(c);
        } else if let Some(p) = parent_of[c] {
            owner[c] = owner[p];
        }
    }
    let mut raw = vec![NOISE; n];
    for e in edges.iter().filter(|e| e.child < n) {
        if let Some(o) = owner[e.parent - n] {
            raw[e.child] = o as i64;
        }
    }
    let labels = ClusterLabels::canonical(&raw);
    Ok((
        labels,
        CondensedTree {
            n_points: n,
            edges,
            stability,
            selected,
        },
    ))
}
