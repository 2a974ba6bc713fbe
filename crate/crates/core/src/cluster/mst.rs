use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Smaller endpoint.
    pub a: usize,
    /// Larger endpoint.
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    fn new(u: usize, v: usize, weight: f64) -> Self {
        Self {
            a: u.min(v),
            b: u.max(v),
            weight,
        }
    }

    /// Total order used for every tie: weight, then endpoints.
    pub fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Prim's algorithm on a dense complete graph. Edge keys are compared as
/// (weight, min endpoint, max endpoint), which makes the tree unique. Edges
/// are returned in that order.
pub fn minimum_spanning_tree(n: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<MstEdge> {
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut best: Vec<MstEdge> = (0..n).map(|v| MstEdge::new(0, v, weight(0, v))).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&x, &y| best[x].key_cmp(&best[y]))
            .expect("a vertex remains outside the tree");
        in_tree[next] = true;
        edges.push(best[next]);
        for v in 0..n {
            if !in_tree[v] {
                let cand = MstEdge::new(next, v, weight(next, v));
                if cand.key_cmp(&best[v]).is_lt() {
                    best[v] = cand;
                }
            }
        }
    }
    edges.sort_by(MstEdge::key_cmp);
    edges
}
