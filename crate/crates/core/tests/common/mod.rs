//! Reference implementations used as test oracles. They are written for
//! clarity (dense matrices, nested loops, plain BFS) and share no code with
//! the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::NaiveDate;
use cometa_core::preprocess::TokenizedDoc;
use cometa_core::topicnet::{BipartiteEdge, BipartiteGraph};
use rand::Rng;

pub fn doc(id: &str, date: NaiveDate, tokens: &[&str]) -> TokenizedDoc {
    TokenizedDoc {
        article_id: id.to_string(),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        published_at: date,
        language: "en".into(),
    }
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Up to `max_docs` documents over a vocabulary of at most `max_terms`
/// words `t0`, `t1`, ... Documents may be empty.
pub fn random_corpus<R: Rng>(rng: &mut R, max_docs: usize, max_terms: usize) -> Vec<TokenizedDoc> {
    let n_docs = rng.random_range(1..=max_docs);
    let n_terms = rng.random_range(1..=max_terms);
    (0..n_docs)
        .map(|d| {
            let len = rng.random_range(0..=30);
            let tokens = (0..len).map(|_| format!("t{}", rng.random_range(0..n_terms))).collect();
            TokenizedDoc {
                article_id: format!("d{d:03}"),
                tokens,
                published_at: date(2020, 1, 1),
                language: "en".into(),
            }
        })
        .collect()
}

/// Sorted vocabulary and dense counts, by nested loops.
pub fn count_nested(docs: &[TokenizedDoc]) -> (Vec<String>, Vec<Vec<u32>>) {
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut dense = vec![vec![0u32; vocab.len()]; docs.len()];
    for (i, d) in docs.iter().enumerate() {
        for (j, term) in vocab.iter().enumerate() {
            for tok in &d.tokens {
                if tok == term {
                    dense[i][j] += 1;
                }
            }
        }
    }
    (vocab, dense)
}

/// Off-diagonal entries of Bᵀ·B where B is the binarized matrix.
pub fn binary_cooc_dense(dense: &[Vec<u32>], vocab: &[String]) -> BTreeMap<(String, String), u64> {
    let v = vocab.len();
    let mut out = BTreeMap::new();
    for a in 0..v {
        for b in (a + 1)..v {
            let mut w = 0u64;
            for row in dense {
                w += u64::from(row[a] > 0) * u64::from(row[b] > 0);
            }
            if w > 0 {
                out.insert((vocab[a].clone(), vocab[b].clone()), w);
            }
        }
    }
    out
}

/// All-pairs BFS closeness: (r/S)·(r/(n−1)) where `r` nodes are reachable
/// at total distance `S`; 0 for isolated nodes.
pub fn bfs_closeness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    (0..n)
        .map(|s| {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            let reached: Vec<usize> = dist.iter().copied().filter(|&d| d != usize::MAX && d > 0).collect();
            let r = reached.len() as f64;
            let total: usize = reached.iter().sum();
            if total == 0 || n < 2 {
                0.0
            } else {
                (r / total as f64) * (r / (n - 1) as f64)
            }
        })
        .collect()
}

/// Random two-mode graph with at most `max_nodes` nodes in total.
pub fn random_bipartite<R: Rng>(rng: &mut R, max_nodes: usize) -> BipartiteGraph {
    let k = rng.random_range(1..=5usize.min(max_nodes - 1));
    let t = rng.random_range(1..=(max_nodes - k));
    let p = rng.random_range(0.05..0.8);
    let mut edges = Vec::new();
    for topic in 0..k {
        for term in 0..t {
            if rng.random_bool(p) {
                edges.push(BipartiteEdge {
                    topic,
                    term,
                    weight: 1.0,
                });
            }
        }
    }
    BipartiteGraph {
        topics: (0..k).collect(),
        terms: (0..t).map(|i| format!("term{i:02}")).collect(),
        edges,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Greedy one-to-one matching of fitted topics to true topics by cosine
/// similarity. Returns `(fitted, truth, cosine)` for every topic.
pub fn greedy_alignment(fitted: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, f) in fitted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            pairs.push((i, j, cosine(f, t)));
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    let (mut used_f, mut used_t) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (i, j, c) in pairs {
        if !used_f.contains(&i) && !used_t.contains(&j) {
            used_f.insert(i);
            used_t.insert(j);
            out.push((i, j, c));
        }
    }
    out.sort_by_key(|&(i, _, _)| i);
    out
}

/// Σ_d Σ_v n_dv · log Σ_k θ_dk φ_kv, evaluated densely.
pub fn dense_log_likelihood(phi: &[Vec<f64>], theta: &[Vec<f64>], dense: &[Vec<u32>]) -> f64 {
    let mut total = 0.0;
    for (d, row) in dense.iter().enumerate() {
        for (v, &n) in row.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let mut p = 0.0;
            for k in 0..phi.len() {
                p += theta[d][k] * phi[k][v];
            }
            total += n as f64 * p.ln();
        }
    }
    total
}

/// Lexicon text and one-per-day documents from 2020-01-01 to 2020-03-15.
/// Ordinary days carry mild scores between −2 and +2; 2020-01-25,
/// 2020-02-15 and 2020-03-11 carry a −6 mean, so they are the only days
/// whose |mean| clears a prominence of 2.
pub fn three_trough_fixture() -> (String, Vec<TokenizedDoc>) {
    let lexicon = "good\t1\nbad\t-1\ndisaster\t-3\n".to_string();
    let troughs = [date(2020, 1, 25), date(2020, 2, 15), date(2020, 3, 11)];
    let baseline: [&[&str]; 5] = [
        &["good"],
        &["bad", "news"],
        &["news"],
        &["good", "good"],
        &["bad", "bad"],
    ];
    let mut docs = Vec::new();
    let mut day = date(2020, 1, 1);
    let mut i = 0;
    while day <= date(2020, 3, 15) {
        if troughs.contains(&day) {
            docs.push(doc(&format!("a{i}"), day, &["disaster", "disaster", "report"]));
            docs.push(doc(&format!("b{i}"), day, &["disaster", "disaster"]));
        } else {
            docs.push(doc(&format!("a{i}"), day, baseline[i % baseline.len()]));
        }
        day = day.succ_opt().unwrap();
        i += 1;
    }
    (lexicon, docs)
}
