//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p tmgraph --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use axum::http::{Method as HttpMethod, StatusCode};
use ndarray::{arr2, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use tmgraph::cluster::{hdbscan, silhouette, ClusterLabels, HdbscanParams};
use tmgraph::coherence::{
    coherence_scores, count_windows, document_counts, npmi, uci, umass, CooccurrenceCounts, MetricValue, CV_WINDOW,
    EPSILON, PMI_WINDOW,
};
use tmgraph::corpus::{model_units, Corpus, Granularity};
use tmgraph::distance::{euclidean, Metric};
use tmgraph::fixtures::{planted, purity, PlantedSpec};
use tmgraph::graph::{build_graph, central_vertices, GRAPH_SCHEMA};
use tmgraph::lda::{fit_lda, GibbsSampler, LdaParams};
use tmgraph::pipeline::{run, Method, PipelineConfig, PipelineRun, RunArtifacts};
use tmgraph::reduce::{directed_weights, fuzzy_union, knn, membership, smooth_knn, t_conorm, umap, LayoutParams, UmapParams};
use tmgraph::service::{router, AppState, Job, JobRequest, JobState, ServiceConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn units_of(corpus: &Corpus) -> Vec<Vec<String>> {
    model_units(corpus, Granularity::Sentence)
        .into_iter()
        .map(|u| u.lemmas)
        .collect()
}

fn diversity(run: &PipelineRun) -> f64 {
    run.metrics.topic_diversity.value().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------- trend

fn trend(runs: &mut Vec<PipelineRun>) -> Outcome {
    let corpus = planted(PlantedSpec::default()).corpus().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let config = |method| PipelineConfig {
        keywords: 25,
        ..PipelineConfig::new(method, 10, 7)
    };
    let lda = run(&config(Method::Lda), &corpus).map_err(|e| e.to_string())?;
    let emb = run(&config(Method::EmbedHdbscan), &corpus).map_err(|e| e.to_string())?;
    let seconds = started.elapsed().as_secs_f64();
    let (d_lda, d_emb) = (diversity(&lda), diversity(&emb));

    // with ten keywords per topic both methods saturate; shown for reference
    let short = |method| run(&PipelineConfig::new(method, 10, 7), &corpus).map(|r| diversity(&r));
    if let (Ok(a), Ok(b)) = (short(Method::Lda), short(Method::EmbedHdbscan)) {
        println!("     info: with 10 keywords per topic, diversity lda={a:.3} embed_hdbscan={b:.3}");
    }

    runs.push(lda);
    runs.push(emb);
    ensure(d_emb > d_lda, || format!("embed_hdbscan {d_emb:.3} is not above lda {d_lda:.3}"))?;
    ensure(d_emb >= 0.9, || format!("embed_hdbscan diversity {d_emb:.3} < 0.9"))?;
    ensure(seconds < 60.0, || format!("took {seconds:.1}s"))?;
    Ok(format!(
        "diversity@25 embed_hdbscan={d_emb:.3} > lda={d_lda:.3}, {seconds:.1}s"
    ))
}

// ---------------------------------------------------------------- hdbscan reference

/// Single-linkage merge: (left, right, distance, size).
struct Merge(usize, usize, f64, usize);

struct RefCluster {
    parent: Option<usize>,
    birth: f64,
    /// Lambda at which the cluster splits into two clusters.
    split: Option<f64>,
    /// Points that leave this cluster without entering a child cluster.
    fallen: Vec<(usize, f64)>,
    children: Vec<usize>,
    members: Vec<usize>,
}

fn lambda(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        f64::INFINITY
    }
}

fn persist(l: f64, b: f64) -> f64 {
    if l == b {
        0.0
    } else {
        l - b
    }
}

fn leaves(merges: &[Merge], n: usize, node: usize, out: &mut Vec<usize>) {
    if node < n {
        out.push(node);
    } else {
        let m = &merges[node - n];
        leaves(merges, n, m.0, out);
        leaves(merges, n, m.1, out);
    }
}

fn size_of(merges: &[Merge], n: usize, node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].3
    }
}

fn condense_into(merges: &[Merge], n: usize, mcs: usize, node: usize, cluster: usize, out: &mut Vec<RefCluster>) {
    if node < n {
        // a lone point still inside the cluster when its last link breaks
        return;
    }
    let Merge(left, right, dist, _) = merges[node - n];
    let l = lambda(dist);
    let (ls, rs) = (size_of(merges, n, left), size_of(merges, n, right));
    if ls >= mcs && rs >= mcs {
        out[cluster].split = Some(l);
        for child in [left, right] {
            let id = out.len();
            let mut members = Vec::new();
            leaves(merges, n, child, &mut members);
            out.push(RefCluster {
                parent: Some(cluster),
                birth: l,
                split: None,
                fallen: Vec::new(),
                children: Vec::new(),
                members,
            });
            out[cluster].children.push(id);
            condense_into(merges, n, mcs, child, id, out);
        }
        return;
    }
    for (child, size) in [(left, ls), (right, rs)] {
        if size >= mcs {
            condense_into(merges, n, mcs, child, cluster, out);
        } else {
            let mut pts = Vec::new();
            leaves(merges, n, child, &mut pts);
            out[cluster].fallen.extend(pts.into_iter().map(|p| (p, l)));
        }
    }
}

/// Kruskal MST over mutual reachability, explicit dendrogram, recursive
/// condensing, and an exhaustive search over every antichain of clusters.
fn reference_hdbscan(points: &Array2<f64>, mcs: usize, min_samples: usize) -> Vec<i64> {
    let n = points.nrows();
    let d = |i: usize, j: usize| euclidean(points.row(i), points.row(j));
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d(i, j)).collect();
            others.sort_by(f64::total_cmp);
            others[min_samples - 1]
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((d(i, j).max(core[i]).max(core[j]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // union-find where every component remembers its dendrogram node
    let mut comp: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    fn root(comp: &mut Vec<usize>, x: usize) -> usize {
        if comp[x] == x {
            x
        } else {
            let r = root(comp, comp[x]);
            comp[x] = r;
            r
        }
    }
    let mut merges: Vec<Merge> = Vec::new();
    for (w, i, j) in pairs {
        let (ri, rj) = (root(&mut comp, i), root(&mut comp, j));
        if ri == rj {
            continue;
        }
        let (a, b) = (node_of[ri], node_of[rj]);
        let size = size_of(&merges, n, a) + size_of(&merges, n, b);
        merges.push(Merge(a, b, w, size));
        comp[rj] = ri;
        node_of[ri] = n + merges.len() - 1;
    }

    let mut clusters = vec![RefCluster {
        parent: None,
        birth: 0.0,
        split: None,
        fallen: Vec::new(),
        children: Vec::new(),
        members: (0..n).collect(),
    }];
    condense_into(&merges, n, mcs, n + merges.len() - 1, 0, &mut clusters);

    // stability: sum over members of (lambda leaving the cluster − birth)
    let stability: Vec<f64> = clusters
        .iter()
        .map(|c| {
            c.members
                .iter()
                .map(|&p| {
                    let leave = c
                        .fallen
                        .iter()
                        .find(|(q, _)| *q == p)
                        .map(|&(_, l)| l)
                        .or(c.split)
                        .expect("member leaves by falling out or by a split");
                    persist(leave, c.birth)
                })
                .sum()
        })
        .collect();

    let ancestor = |mut c: usize, of: usize| {
        while let Some(p) = clusters[c].parent {
            if p == of {
                return true;
            }
            c = p;
        }
        false
    };
    let selected: Vec<usize> = if clusters.len() == 1 {
        vec![0]
    } else {
        let candidates: Vec<usize> = (1..clusters.len()).collect();
        let mut best: (f64, usize, Vec<usize>) = (f64::NEG_INFINITY, 0, Vec::new());
        for mask in 0u32..(1 << candidates.len()) {
            let chosen: Vec<usize> = candidates
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            let antichain = chosen
                .iter()
                .all(|&a| chosen.iter().all(|&b| a == b || !ancestor(a, b)));
            if !antichain {
                continue;
            }
            let total: f64 = chosen.iter().map(|&c| stability[c]).sum();
            if total > best.0 || (total == best.0 && chosen.len() > best.1) {
                best = (total, chosen.len(), chosen);
            }
        }
        best.2
    };

    let mut raw = vec![-1i64; n];
    for &c in &selected {
        for &p in &clusters[c].members {
            raw[p] = c as i64;
        }
    }
    ClusterLabels::canonical(&raw).labels
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Array2<f64>, usize, usize) {
    let n = rng.random_range(3..=12);
    let blobs = rng.random_range(1..=3);
    let centers: Vec<[f64; 2]> = (0..blobs)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect();
    let spread = rng.random_range(0.1..3.0);
    let mut pts = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        if i > 0 && rng.random_bool(0.1) {
            let src = rng.random_range(0..i);
            let row = pts.row(src).to_owned();
            pts.row_mut(i).assign(&row);
            continue;
        }
        let c = centers[rng.random_range(0..blobs)];
        for (k, center) in c.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            pts[[i, k]] = center + spread * z;
        }
    }
    let mcs = rng.random_range(2..=n.min(5));
    let min_samples = rng.random_range(1..=(n - 1).min(4));
    (pts, mcs, min_samples)
}

fn hdbscan_reference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut clustered = 0;
    for case in 0..100 {
        let (pts, mcs, ms) = random_instance(&mut rng);
        let (labels, _) = hdbscan(
            pts.view(),
            HdbscanParams {
                min_cluster_size: mcs,
                min_samples: Some(ms),
            },
        )
        .map_err(|e| format!("case {case}: {e}"))?;
        let expected = reference_hdbscan(&pts, mcs, ms);
        ensure(labels.labels == expected, || {
            format!(
                "case {case} (n={}, mcs={mcs}, min_samples={ms}): got {:?}, reference {:?}",
                pts.nrows(),
                labels.labels,
                expected
            )
        })?;
        if labels.clusters > 1 {
            clustered += 1;
        }
    }
    Ok(format!("100/100 instances match ({clustered} with 2+ clusters)"))
}

// ---------------------------------------------------------------- coherence

fn toy_corpus() -> Vec<Vec<String>> {
    let vocab = [
        "apple", "bread", "cheese", "dough", "egg", "flour", "grape", "honey", "ice", "jam", "kale", "lime",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..20)
        .map(|s| {
            let len = if s == 13 { 130 } else { rng.random_range(2..=24) };
            // sentences lean on one half of the vocabulary so pairs co-occur unevenly
            let half = s % 2;
            (0..len)
                .map(|_| {
                    let i = if rng.random_bool(0.75) {
                        half * 6 + rng.random_range(0..6)
                    } else {
                        rng.random_range(0..vocab.len())
                    };
                    vocab[i].to_string()
                })
                .collect()
        })
        .collect()
}

fn enumerate_windows(units: &[Vec<String>], w: usize) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    for u in units.iter().filter(|u| !u.is_empty()) {
        if u.len() <= w {
            out.push(u.iter().map(String::as_str).collect());
        } else {
            for start in 0..=(u.len() - w) {
                out.push(u[start..start + w].iter().map(String::as_str).collect());
            }
        }
    }
    out
}

struct Windows<'a>(Vec<Vec<&'a str>>);

impl Windows<'_> {
    fn n(&self) -> f64 {
        self.0.len() as f64
    }

    fn with(&self, words: &[&str]) -> f64 {
        self.0
            .iter()
            .filter(|win| words.iter().all(|w| win.contains(w)))
            .count() as f64
    }

    fn npmi(&self, a: &str, b: &str) -> Option<f64> {
        let (ca, cb) = (self.with(&[a]), self.with(&[b]));
        if ca == 0.0 || cb == 0.0 {
            return None;
        }
        let pab = self.with(&[a, b]) / self.n() + EPSILON;
        let pmi = (pab / ((ca / self.n()) * (cb / self.n()))).ln();
        let denom = -pab.ln();
        Some(if denom <= 0.0 { 1.0 } else { (pmi / denom).clamp(-1.0, 1.0) })
    }
}

fn oracle_umass(topic: &[&str], units: &[Vec<String>]) -> Option<f64> {
    let docs = Windows(enumerate_windows(units, usize::MAX));
    let mut vals = Vec::new();
    for i in 1..topic.len() {
        for j in 0..i {
            let dj = docs.with(&[topic[j]]);
            if dj > 0.0 {
                vals.push(((docs.with(&[topic[i], topic[j]]) + 1.0) / dj).ln());
            }
        }
    }
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn oracle_pairs(topic: &[&str], f: impl Fn(&str, &str) -> Option<f64>) -> Option<f64> {
    let mut vals = Vec::new();
    for i in 0..topic.len() {
        for j in (i + 1)..topic.len() {
            if let Some(v) = f(topic[i], topic[j]) {
                vals.push(v);
            }
        }
    }
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn oracle_uci(topic: &[&str], units: &[Vec<String>]) -> Option<f64> {
    let win = Windows(enumerate_windows(units, PMI_WINDOW));
    oracle_pairs(topic, |a, b| {
        let (ca, cb) = (win.with(&[a]), win.with(&[b]));
        (ca > 0.0 && cb > 0.0).then(|| {
            let pab = win.with(&[a, b]) / win.n() + EPSILON;
            (pab / ((ca / win.n()) * (cb / win.n()))).ln()
        })
    })
}

fn oracle_npmi(topic: &[&str], units: &[Vec<String>]) -> Option<f64> {
    let win = Windows(enumerate_windows(units, PMI_WINDOW));
    oracle_pairs(topic, |a, b| win.npmi(a, b))
}

fn oracle_cv(topic: &[&str], units: &[Vec<String>]) -> f64 {
    let win = Windows(enumerate_windows(units, CV_WINDOW));
    let vecs: Vec<Vec<f64>> = topic
        .iter()
        .map(|a| topic.iter().map(|b| win.npmi(a, b).unwrap_or(0.0)).collect())
        .collect();
    let total: Vec<f64> = (0..topic.len()).map(|j| vecs.iter().map(|v| v[j]).sum()).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos: Vec<f64> = vecs
        .iter()
        .map(|v| {
            let dot: f64 = v.iter().zip(&total).map(|(a, b)| a * b).sum();
            let (nv, nt) = (norm(v), norm(&total));
            if nv == 0.0 || nt == 0.0 {
                0.0
            } else {
                dot / (nv * nt)
            }
        })
        .collect();
    cos.iter().sum::<f64>() / cos.len() as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn coherence_oracles() -> Outcome {
    let units = toy_corpus();
    let refs: Vec<&[String]> = units.iter().map(Vec::as_slice).collect();
    let topics: Vec<Vec<&str>> = vec![
        vec!["apple", "bread", "cheese", "dough", "egg"],
        vec!["grape", "honey", "ice", "jam", "kale"],
        vec!["apple", "lime", "honey", "flour", "zucchini"],
        vec!["cheese", "jam"],
    ];
    let docs = document_counts(&refs, None);
    let pmi = count_windows(&refs, PMI_WINDOW, None);
    let cv = count_windows(&refs, CV_WINDOW, None);
    let mut worst = 0.0_f64;
    let mut check = |name: &str, t: usize, got: f64, want: f64| -> Result<(), String> {
        worst = worst.max((got - want).abs());
        ensure(close(got, want), || format!("{name} topic {t}: {got} vs oracle {want}"))
    };
    let mut sums = [0.0; 4];
    for (t, topic) in topics.iter().enumerate() {
        let want_umass = oracle_umass(topic, &units).ok_or("oracle umass undefined")?;
        let want_uci = oracle_uci(topic, &units).ok_or("oracle uci undefined")?;
        let want_npmi = oracle_npmi(topic, &units).ok_or("oracle npmi undefined")?;
        let want_cv = oracle_cv(topic, &units);
        check("umass", t, umass(topic, &docs).map_err(|e| e.to_string())?, want_umass)?;
        check("uci", t, uci(topic, &pmi).map_err(|e| e.to_string())?, want_uci)?;
        check("npmi", t, npmi(topic, &pmi).map_err(|e| e.to_string())?, want_npmi)?;
        check("c_v", t, tmgraph::coherence::c_v(topic, &cv).map_err(|e| e.to_string())?, want_cv)?;
        sums[0] += want_cv;
        sums[1] += want_umass;
        sums[2] += want_npmi;
        sums[3] += want_uci;
    }
    let scores = coherence_scores(&topics, &refs);
    let k = topics.len() as f64;
    for (name, got, want) in [
        ("mean c_v", scores.c_v, sums[0] / k),
        ("mean umass", scores.umass, sums[1] / k),
        ("mean npmi", scores.npmi, sums[2] / k),
        ("mean uci", scores.uci, sums[3] / k),
    ] {
        let got = got.value().ok_or_else(|| format!("{name} is NA"))?;
        check(name, 0, got, want)?;
    }
    let windows = |c: &CooccurrenceCounts| c.windows;
    Ok(format!(
        "4 topics x 4 metrics, max |diff| {worst:.1e} ({} pmi windows, {} c_v windows)",
        windows(&pmi),
        windows(&cv)
    ))
}

// ---------------------------------------------------------------- silhouette

fn direct_silhouette(points: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = points.nrows();
    let d = |i: usize, j: usize| euclidean(points.row(i), points.row(j));
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mean_to = |i: usize, c: usize| {
        let others: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == c).collect();
        others.iter().map(|&j| d(i, j)).sum::<f64>() / others.len() as f64
    };
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let a = mean_to(i, labels[i]);
            let b = clusters
                .iter()
                .filter(|&&c| c != labels[i])
                .map(|&c| mean_to(i, c))
                .fold(f64::INFINITY, f64::min);
            (b - a) / a.max(b)
        })
        .collect();
    s.iter().sum::<f64>() / n as f64
}

fn silhouette_check() -> Outcome {
    let pts = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
    let got = silhouette(pts.view(), &ClusterLabels::canonical(&[0, 0, 1, 1])).map_err(|e| e.to_string())?;
    let direct = direct_silhouette(&pts, &[0, 0, 1, 1]);
    ensure((got - direct).abs() <= 1e-6, || format!("{got} vs direct {direct}"))?;
    ensure((got - 0.8997).abs() < 5e-5, || format!("{got} is not ≈ 0.8997"))?;
    let single = MetricValue::from_result(silhouette(pts.view(), &ClusterLabels::canonical(&[0, 0, 0, 0])));
    ensure(single.is_na(), || format!("single cluster gave {single}"))?;
    Ok(format!("s={got:.6}, direct={direct:.6}, single cluster -> {single}"))
}

// ---------------------------------------------------------------- lda

fn lda_recovery() -> Outcome {
    let fixture = planted(PlantedSpec {
        topics: 2,
        ..PlantedSpec::default()
    });
    let corpus = fixture.corpus().map_err(|e| e.to_string())?;
    let units = units_of(&corpus);
    ensure(units.len() == fixture.labels.len(), || "unit count differs from planted labels".into())?;
    let refs: Vec<&[String]> = units.iter().map(Vec::as_slice).collect();
    // the 50/K default prior outweighs eight-token units; a flat prior is used
    let params = LdaParams {
        iterations: 200,
        alpha: Some(1.0),
        ..LdaParams::new(2, 7)
    };
    let default_prior = fit_lda(
        &refs,
        LdaParams {
            iterations: 200,
            ..LdaParams::new(2, 7)
        },
    )
    .map_err(|e| e.to_string())?;
    let default_assign: Vec<i64> = default_prior.assignments().iter().map(|&a| a as i64).collect();
    println!(
        "     info: with the default alpha = 50/K, purity {:.3}",
        purity(&default_assign, &fixture.labels)
    );
    let mut sampler = GibbsSampler::new(&refs, params).map_err(|e| e.to_string())?;
    ensure(sampler.counts_consistent(), || "counts inconsistent after initialization".into())?;
    for sweep in 1..=200 {
        sampler.sweep();
        ensure(sampler.counts_consistent(), || format!("counts inconsistent after sweep {sweep}"))?;
    }
    let model = sampler.into_model();
    let assign: Vec<i64> = model.assignments().iter().map(|&a| a as i64).collect();
    let p = purity(&assign, &fixture.labels);
    ensure(p >= 0.9, || format!("purity {p:.3} < 0.9"))?;
    Ok(format!("alpha=1: purity {p:.3}, counts consistent after all 200 sweeps"))
}

// ---------------------------------------------------------------- umap

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

fn two_blobs(seed: u64) -> Array2<f64> {
    let mut x = gaussian(40, 10, seed);
    for i in 20..40 {
        x[[i, 0]] += 10.0;
    }
    x
}

fn umap_checks() -> Outcome {
    let x = gaussian(80, 8, 11);
    let k = 15;
    let mut asymmetric = 0;
    let mut worst_sigma = 0.0_f64;
    for metric in [Metric::Euclidean, Metric::Cosine] {
        let graph = knn(x.view(), k, metric).map_err(|e| e.to_string())?;
        let cal = smooth_knn(&graph, 1.0).map_err(|e| e.to_string())?;
        let directed = directed_weights(&graph, &cal);
        let fuzzy = fuzzy_union(graph.len(), &directed, cal.clone());
        let mut one_way: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, w) in &directed {
            one_way.insert((i, j), w);
        }
        for i in 0..fuzzy.n {
            for j in 0..fuzzy.n {
                let (wij, wji) = (fuzzy.weight(i, j), fuzzy.weight(j, i));
                if wij.to_bits() != wji.to_bits() {
                    asymmetric += 1;
                }
                if i != j {
                    let a = one_way.get(&(i, j)).copied().unwrap_or(0.0);
                    let b = one_way.get(&(j, i)).copied().unwrap_or(0.0);
                    let expect = t_conorm(a, b);
                    ensure(wij.to_bits() == expect.to_bits(), || {
                        format!("w({i},{j})={wij} but a+b-ab={expect}")
                    })?;
                }
            }
        }
        let target = (k as f64).log2();
        for (dists, &c) in graph.distances.iter().zip(&cal) {
            let sum: f64 = dists.iter().map(|&d| membership(d, c)).sum();
            worst_sigma = worst_sigma.max((sum - target).abs());
        }
    }
    ensure(asymmetric == 0, || format!("{asymmetric} asymmetric weight pairs"))?;
    ensure(worst_sigma < 1e-5, || format!("membership sum misses log2(k) by {worst_sigma:.2e}"))?;

    let mut separated = 0;
    for seed in 0..10 {
        let pts = two_blobs(100 + seed);
        let params = UmapParams {
            neighbors: 15,
            metric: Metric::Euclidean,
            layout: LayoutParams {
                target_dim: 2,
                seed,
                ..LayoutParams::default()
            },
        };
        let layout = umap(pts.view(), &params).map_err(|e| e.to_string())?.coords;
        let (mut intra, mut cross) = (0.0_f64, f64::INFINITY);
        for i in 0..40 {
            for j in (i + 1)..40 {
                let d = euclidean(layout.row(i), layout.row(j));
                if (i < 20) == (j < 20) {
                    intra = intra.max(d);
                } else {
                    cross = cross.min(d);
                }
            }
        }
        if cross > intra {
            separated += 1;
        }
    }
    ensure(separated >= 9, || format!("blobs separated for {separated}/10 seeds"))?;

    let params = UmapParams {
        layout: LayoutParams {
            seed: 5,
            ..LayoutParams::default()
        },
        ..UmapParams::default()
    };
    let a = umap(x.view(), &params).map_err(|e| e.to_string())?.coords;
    let b = umap(x.view(), &params).map_err(|e| e.to_string())?.coords;
    let identical = a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits());
    ensure(identical, || "same seed gave different layouts".into())?;
    Ok(format!(
        "symmetric, sigma error {worst_sigma:.1e}, blobs separated {separated}/10, layout bit-identical"
    ))
}

// ---------------------------------------------------------------- graph

fn check_graph(run: &PipelineRun) -> Result<usize, String> {
    let tag = &run.result.method;
    let g = &run.graph;
    let topics: Vec<_> = run.result.topics.iter().filter(|t| !t.keywords.is_empty()).collect();
    for e in &g.edges {
        ensure(e.source != e.target, || format!("{tag}: self-loop on {}", e.source))?;
        let justified = topics.iter().any(|t| {
            let l = t.lemmas();
            l.contains(&e.source.as_str()) && l.contains(&e.target.as_str())
        });
        ensure(justified, || format!("{tag}: edge {}-{} not in any keyword list", e.source, e.target))?;
    }
    let lemmas: Vec<&str> = g.vertices.iter().map(|v| v.lemma.as_str()).collect();
    let unique: BTreeSet<&str> = lemmas.iter().copied().collect();
    ensure(unique.len() == lemmas.len(), || format!("{tag}: duplicate vertices"))?;
    let keyword_union: BTreeSet<&str> = topics.iter().flat_map(|t| t.lemmas()).collect();
    ensure(unique == keyword_union, || format!("{tag}: vertex set differs from keyword union"))?;
    let edge_set: BTreeSet<(&str, &str)> = g.edges.iter().map(|e| (e.source.as_str(), e.target.as_str())).collect();
    ensure(edge_set.len() == g.edges.len(), || format!("{tag}: duplicate edges"))?;
    for t in &topics {
        let l = t.lemmas();
        for a in &l {
            for b in &l {
                if a < b {
                    ensure(edge_set.contains(&(*a, *b)), || format!("{tag}: missing edge {a}-{b}"))?;
                }
            }
        }
        let holders: Vec<&str> = g
            .vertices
            .iter()
            .filter(|v| v.central_for.contains(&t.id))
            .map(|v| v.lemma.as_str())
            .collect();
        ensure(holders.len() == 1, || format!("{tag}: topic {} has {} central vertices", t.id, holders.len()))?;
        let max = t.keywords.iter().map(|k| k.weight).fold(f64::NEG_INFINITY, f64::max);
        let argmax = t.keywords.iter().filter(|k| k.weight == max).map(|k| k.lemma.as_str()).min().unwrap();
        ensure(holders[0] == argmax, || format!("{tag}: topic {} central {} is not the argmax {argmax}", t.id, holders[0]))?;
        let listed = g.topics.iter().find(|gt| gt.id == t.id).map(|gt| gt.central.as_str());
        ensure(listed == Some(argmax), || format!("{tag}: topic {} lists central {listed:?}", t.id))?;
    }
    let base = central_vertices(&run.result);
    for factor in [1e-9, 0.37, 1.0, 2.5, 1e6] {
        let mut scaled = run.result.clone();
        for t in &mut scaled.topics {
            for k in &mut t.keywords {
                k.weight *= factor;
            }
        }
        ensure(central_vertices(&scaled) == base, || format!("{tag}: central vertices change under scaling by {factor}"))?;
        let rebuilt = build_graph(&scaled).map_err(|e| e.to_string())?;
        let centrals: Vec<&str> = rebuilt.topics.iter().map(|t| t.central.as_str()).collect();
        let expected: Vec<&str> = g.topics.iter().map(|t| t.central.as_str()).collect();
        ensure(centrals == expected, || format!("{tag}: graph centrals change under scaling by {factor}"))?;
    }
    Ok(g.edges.len())
}

fn graph_invariants(runs: &mut Vec<PipelineRun>) -> Outcome {
    let four = planted(PlantedSpec::default()).corpus().map_err(|e| e.to_string())?;
    let two = planted(PlantedSpec {
        topics: 2,
        ..PlantedSpec::default()
    })
    .corpus()
    .map_err(|e| e.to_string())?;
    for corpus in [&four, &two] {
        for method in Method::ALL {
            for k in [2, 4] {
                runs.push(run(&PipelineConfig::new(method, k, 3), corpus).map_err(|e| format!("{method}: {e}"))?);
            }
        }
    }
    let mut edges = 0;
    for r in runs.iter() {
        edges += check_graph(r)?;
    }
    Ok(format!("{} runs, {edges} edges checked", runs.len()))
}

// ---------------------------------------------------------------- end to end

fn end_to_end(runs: &mut Vec<PipelineRun>) -> Outcome {
    let corpus = planted(PlantedSpec::default()).corpus().map_err(|e| e.to_string())?;
    let units = model_units(&corpus, Granularity::Sentence).len();
    ensure(units == 200, || format!("fixture has {units} units"))?;
    let config = PipelineConfig::new(Method::EmbedHdbscan, 10, 42);
    let mut artifacts: Vec<RunArtifacts> = Vec::new();
    let mut slowest = 0.0_f64;
    for _ in 0..2 {
        let started = Instant::now();
        let r = run(&config, &corpus).map_err(|e| e.to_string())?;
        slowest = slowest.max(started.elapsed().as_secs_f64());
        artifacts.push(r.artifacts().map_err(|e| e.to_string())?);
        runs.push(r);
    }
    ensure(slowest < 120.0, || format!("run took {slowest:.1}s"))?;
    for ((name, a), (_, b)) in artifacts[0].files().into_iter().zip(artifacts[1].files()) {
        ensure(a.as_bytes() == b.as_bytes(), || format!("{name} differs between runs"))?;
    }
    Ok(format!("200 sentences, slowest run {slowest:.2}s, 3 artifacts byte-identical"))
}

// ---------------------------------------------------------------- service

fn job_state_properties() -> Result<usize, String> {
    const STATES: [JobState; 4] = [JobState::Queued, JobState::Running, JobState::Done, JobState::Failed];
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 512,
        ..ProptestConfig::default()
    });
    let strategy = proptest::collection::vec((0usize..4, any::<bool>()), 0..12);
    runner
        .run(&strategy, |steps| {
            let mut job = Job::new(
                "job".into(),
                "corpus".into(),
                JobRequest {
                    method: Method::Lda,
                    num_topics: 2,
                    seed: 0,
                },
            );
            let mut trail = vec![job.state];
            for (target, use_fail) in steps {
                let next = STATES[target];
                let before = job.clone();
                let allowed = job.state.can_move_to(next);
                let moved = if use_fail && next == JobState::Failed {
                    job.fail("error").is_ok()
                } else {
                    job.transition(next).is_ok()
                };
                prop_assert_eq!(moved, allowed);
                if moved {
                    prop_assert_eq!(job.state, next);
                    prop_assert_eq!(job.state.rank(), before.state.rank() + 1);
                    trail.push(job.state);
                } else {
                    prop_assert_eq!(&job, &before);
                }
                if before.state.is_terminal() {
                    prop_assert!(!moved);
                }
                prop_assert_eq!(job.started_at.is_some(), job.state != JobState::Queued);
                prop_assert_eq!(job.finished_at.is_some(), job.state.is_terminal());
            }
            prop_assert!(trail.windows(2).all(|w| w[0].can_move_to(w[1])));
            prop_assert!(trail.len() <= 3);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(512)
}

fn cli_fit(files: &[(String, String)], work: &Path) -> Result<RunArtifacts, String> {
    let input = work.join("input");
    let out = work.join("out");
    std::fs::create_dir_all(&input).map_err(|e| e.to_string())?;
    for (name, text) in files {
        std::fs::write(input.join(name), text).map_err(|e| e.to_string())?;
    }
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_tmgraph"))
        .args(["fit", "--method", "embed_hdbscan", "--topics", "4", "--seed", "9", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("cli fit failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    let read = |n: &str| std::fs::read_to_string(out.join(n)).map_err(|e| e.to_string());
    Ok(RunArtifacts {
        topics: read("topics.json")?,
        metrics: read("metrics.json")?,
        graph: read("graph.json")?,
    })
}

async fn service_fit(files: &[(String, String)], data: &Path) -> Result<(RunArtifacts, Vec<JobState>), String> {
    let state = AppState::open(ServiceConfig {
        data_dir: data.to_path_buf(),
        ..ServiceConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let app = router(state);
    let corpus = common::prepared_corpus(&app, &common::as_refs(files)).await;
    let (status, body) = common::submit(&app, &corpus, json!({"method": "embed_hdbscan", "num_topics": 4, "seed": 9})).await;
    ensure(status == StatusCode::ACCEPTED, || format!("submit returned {status}: {body}"))?;
    let job = body["job_id"].as_str().ok_or("no job id")?.to_string();
    let seen = common::poll_until_terminal(&app, &job).await;
    let mut fetched = Vec::new();
    for name in ["topics", "metrics", "graph"] {
        let (status, bytes) = common::get(&app, &format!("/api/models/{job}/{name}")).await;
        ensure(status == StatusCode::OK, || format!("{name} returned {status}"))?;
        fetched.push(String::from_utf8(bytes).map_err(|e| e.to_string())?);
    }
    let graph = fetched.pop().unwrap();
    let metrics = fetched.pop().unwrap();
    let topics = fetched.pop().unwrap();
    let (status, _) = common::send(
        &app,
        common::json_request(HttpMethod::GET, &format!("/api/models/{job}/keywords/none/citations"), None),
    )
    .await;
    ensure(status == StatusCode::OK, || format!("citations returned {status}"))?;
    Ok((RunArtifacts { topics, metrics, graph }, seen))
}

fn service_contract() -> Outcome {
    let cases = job_state_properties()?;

    let files = common::planted_files();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cli = cli_fit(&files, work.path())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let (served, seen) = runtime.block_on(service_fit(&files, &work.path().join("data")))?;

    ensure(seen.last() == Some(&JobState::Done), || format!("job ended in {:?}", seen.last()))?;
    ensure(seen.windows(2).all(|w| w[0].rank() <= w[1].rank()), || format!("polled states went backwards: {seen:?}"))?;

    let schema: Value = serde_json::from_str(GRAPH_SCHEMA).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let graph: Value = serde_json::from_str(&served.graph).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(&graph).map(|e| e.to_string()).collect();
    ensure(errors.is_empty(), || format!("served graph violates schema: {errors:?}"))?;
    let mut broken = graph.clone();
    broken["edges"] = json!([{"source": "a"}]);
    ensure(!validator.is_valid(&broken), || "schema accepts an edge without a target".into())?;

    for ((name, a), (_, b)) in cli.files().into_iter().zip(served.files()) {
        ensure(a == b, || format!("{name}: CLI and service artifacts differ"))?;
    }
    Ok(format!(
        "{cases} state-machine cases, polled {} states, graph schema-valid, CLI == service for 3 artifacts",
        seen.len()
    ))
}

fn main() -> ExitCode {
    let mut runs: Vec<PipelineRun> = Vec::new();
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    };
    report("trend: diversity embed_hdbscan vs lda", trend(&mut runs));
    report("hdbscan matches reference path", hdbscan_reference());
    report("coherence matches brute-force oracles", coherence_oracles());
    report("silhouette analytic check", silhouette_check());
    report("lda planted recovery", lda_recovery());
    report("umap checks", umap_checks());
    let e2e = end_to_end(&mut runs);
    report("graph invariants on all fixture runs", graph_invariants(&mut runs));
    report("end-to-end determinism and throughput", e2e);
    report("service contract", service_contract());
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
