use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FuzzyGraph;
use crate::error::{Error, Result};

const GRAD_CLIP: f64 = 4.0;
const INIT_RANGE: f64 = 10.0;
const CHECKPOINT_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub target_dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub min_dist: f64,
    pub spread: f64,
    pub negative_samples: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            target_dim: 5,
            epochs: 200,
            seed: 0,
            min_dist: 0.1,
            spread: 1.0,
            negative_samples: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowDimLayout {
    pub coords: Array2<f64>,
    pub epochs: usize,
    pub seed: u64,
}

fn curve(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

/// Least-squares fit of `1/(1 + a·x^(2b))` to the target membership curve
/// (1 below `min_dist`, `exp(−(x − min_dist)/spread)` above) on
/// `x ∈ [0, 3·spread]`, by Levenberg–Marquardt.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (curve(x, a, b) - y).powi(2))
            .sum()
    };

    let (mut a, mut b) = (1.0_f64, 1.0_f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // normal equations J^T J and J^T r for the residuals r = y − f
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                // f(0) = 1 exactly and both partials vanish
                continue;
            }
            let p = x.powf(2.0 * b);
            let denom = (1.0 + a * p).powi(2);
            let da = -p / denom;
            let db = -a * p * 2.0 * x.ln() / denom;
            let r = y - curve(x, a, b);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let m11 = jaa * (1.0 + lambda);
            let m22 = jbb * (1.0 + lambda);
            let det = m11 * m22 - jab * jab;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step_a = (m22 * ga - jab * gb) / det;
            let step_b = (m11 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let c = sse(na, nb);
                if c < cost {
                    let done = (cost - c) < 1e-15 * cost.max(1e-300);
                    a = na;
                    b = nb;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Fuzzy-set cross-entropy between the graph and the layout's membership
/// curve, summed over all unordered pairs.
pub fn cross_entropy(graph: &FuzzyGraph, coords: &Array2<f64>, a: f64, b: f64) -> f64 {
    const EPS: f64 = 1e-12;
    let n = graph.n;
    let mut total = 0.0;
    let mut next = graph.edges.iter().peekable();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = match next.peek() {
                Some(&&(ei, ej, w)) if ei == i && ej == j => {
                    next.next();
                    w
                }
                _ => 0.0,
            };
            let d2: f64 = coords
                .row(i)
                .iter()
                .zip(coords.row(j).iter())
                .map(|(x, y)| (x - y).powi(2))
                .sum();
            let q = (1.0 / (1.0 + a * d2.powf(b))).clamp(EPS, 1.0 - EPS);
            if w > 0.0 {
                total += w * (w / q).ln();
            }
            if w < 1.0 {
                total += (1.0 - w) * ((1.0 - w) / (1.0 - q)).ln();
            }
        }
    }
    total
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

pub fn optimize_layout(graph: &FuzzyGraph, params: &LayoutParams) -> Result<LowDimLayout> {
    run(graph, params, false).map(|(layout, _)| layout)
}

/// Like [`optimize_layout`], also returning the cross-entropy at epoch 0 and
/// every 50 epochs thereafter (plus the final epoch).
pub fn optimize_layout_traced(
    graph: &FuzzyGraph,
    params: &LayoutParams,
) -> Result<(LowDimLayout, Vec<(usize, f64)>)> {
    run(graph, params, true)
}

fn run(graph: &FuzzyGraph, params: &LayoutParams, trace: bool) -> Result<(LowDimLayout, Vec<(usize, f64)>)> {
    if params.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if params.target_dim == 0 {
        return Err(Error::invalid("target dimension must be at least 1"));
    }
    let n = graph.n;
    let dim = params.target_dim;
    let (a, b) = fit_ab(params.min_dist, params.spread);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut y = Array2::<f64>::zeros((n, dim));
    for v in y.iter_mut() {
        *v = rng.random_range(-INIT_RANGE..INIT_RANGE);
    }

    let max_w = graph.edges.iter().map(|e| e.2).fold(0.0_f64, f64::max);
    let epochs = params.epochs;
    let cutoff = max_w / epochs as f64;
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut per_sample = Vec::new();
    for &(i, j, w) in &graph.edges {
        if w < cutoff {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            per_sample.push(max_w / w);
        }
    }
    let mut next_sample = per_sample.clone();

    let mut trace_points = Vec::new();
    if trace {
        trace_points.push((0, cross_entropy(graph, &y, a, b)));
    }

    let mut yi = vec![0.0; dim];
    for epoch in 0..epochs {
        let alpha = 1.0 - epoch as f64 / epochs as f64;
        for e in 0..heads.len() {
            if next_sample[e] > epoch as f64 + 1.0 {
                continue;
            }
            let (i, j) = (heads[e], tails[e]);
            yi.iter_mut().zip(y.row(i)).for_each(|(d, s)| *d = *s);

            let d2: f64 = (0..dim).map(|c| (yi[c] - y[[j, c]]).powi(2)).sum();
            let coef = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for c in 0..dim {
                let g = clip(coef * (yi[c] - y[[j, c]])) * alpha;
                yi[c] += g;
                y[[j, c]] -= g;
            }

            for _ in 0..params.negative_samples {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let d2: f64 = (0..dim).map(|c| (yi[c] - y[[k, c]]).powi(2)).sum();
                let coef = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for c in 0..dim {
                    let g = if coef > 0.0 {
                        clip(coef * (yi[c] - y[[k, c]]))
                    } else {
                        GRAD_CLIP
                    };
                    yi[c] += g * alpha;
                }
            }
            y.row_mut(i).iter_mut().zip(&yi).for_each(|(d, s)| *d = *s);
            next_sample[e] += per_sample[e];
        }
        let done = epoch + 1;
        if trace && (done % CHECKPOINT_EVERY == 0 || done == epochs) {
            trace_points.push((done, cross_entropy(graph, &y, a, b)));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("layout diverged to non-finite coordinates"));
    }
    Ok((
        LowDimLayout {
            coords: y,
            epochs,
            seed: params.seed,
        },
        trace_points,
    ))
}
