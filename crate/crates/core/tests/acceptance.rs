//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test -p cometa-core --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cometa_core::coocnet::{self, CoocMode};
use cometa_core::corpus::CorpusStore;
use cometa_core::dtm::{self, DtmError};
use cometa_core::fixtures::{
    guardian_term_topics, synthetic_articles, SyntheticLda, GUARDIAN_CLOSENESS_TERMS, GUARDIAN_MEMBERSHIPS,
    SEEDED_CLUSTERS,
};
use cometa_core::pipeline::{run_pipeline, BundleStore, PipelineConfig};
use cometa_core::preprocess::TokenizedDoc;
use cometa_core::sentiment::{self, score_document, Bucket, Lexicon};
use cometa_core::topicmodel::{self, GibbsSampler, LdaConfig, LdaModel};
use cometa_core::topicnet::{self, NodeMode};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn within(budget: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed <= budget {
        Ok(())
    } else {
        Err(format!("took {:.2?}, budget {:.0?}", elapsed, budget))
    }
}

fn dtm_of(docs: &[Vec<String>]) -> dtm::DocumentTermMatrix {
    let ids = (0..docs.len()).map(|i| format!("d{i:04}")).collect();
    dtm::DocumentTermMatrix::from_token_lists(ids, docs).expect("non-empty corpus")
}

/// Degree on the two-mode fixture equals membership / 5.
fn two_mode_degree() -> Outcome {
    let start = Instant::now();
    let graph = topicnet::build_bipartite(&guardian_term_topics());
    let degree: BTreeMap<String, f64> = topicnet::bipartite_degree(&graph)
        .into_iter()
        .filter(|s| s.mode == NodeMode::Term)
        .map(|s| (s.node, s.value))
        .collect();
    let elapsed = start.elapsed();
    for &(term, m) in GUARDIAN_MEMBERSHIPS {
        let expected = m as f64 / 5.0;
        let got = degree[term];
        ensure!((got - expected).abs() <= 1e-12, "{term}: {got} != {expected}");
    }
    within(Duration::from_secs(1), elapsed)?;
    Ok(format!(
        "people={:.3} virus={:.3} health={:.3} public={:.3} masks={:.3} in {:.2?}",
        degree["people"], degree["virus"], degree["health"], degree["public"], degree["masks"], elapsed
    ))
}

/// BFS oracle agreement on random graphs, then the top closeness tier on
/// the two-mode fixture.
fn two_mode_closeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let g = random_bipartite(&mut rng, 30);
        let k = g.topics.len();
        let n = k + g.terms.len();
        ensure!(n <= 30, "case {case}: {n} nodes");
        let edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.topic, k + e.term)).collect();
        let oracle = bfs_closeness(n, &edges);
        let got = topicnet::bipartite_closeness(&g);
        ensure!(got.len() == n, "case {case}: {} scores for {n} nodes", got.len());
        for (i, (s, o)) in got.iter().zip(&oracle).enumerate() {
            let diff = (s.value - o).abs();
            worst = worst.max(diff);
            ensure!(diff <= 1e-9, "case {case}, node {i}: {} vs oracle {o}", s.value);
        }
    }

    let graph = topicnet::build_bipartite(&guardian_term_topics());
    let table = topicnet::bipartite_centrality(&graph);
    let memberships: BTreeMap<&str, usize> = graph
        .terms
        .iter()
        .map(|t| (t.as_str(), graph.memberships(t).len()))
        .collect();
    let named_min = GUARDIAN_CLOSENESS_TERMS
        .iter()
        .map(|t| memberships[t])
        .min()
        .expect("named terms");
    let tier: BTreeSet<&str> = memberships
        .iter()
        .filter(|(_, &m)| m >= named_min)
        .map(|(t, _)| *t)
        .collect();
    let ranked = table.ranked_terms(|r| r.closeness_norm);
    let top: BTreeSet<&str> = ranked.iter().take(tier.len()).map(|r| r.node.as_str()).collect();
    ensure!(
        top == tier,
        "top {} closeness terms {:?} differ from tier {:?}",
        tier.len(),
        top,
        tier
    );
    let tier_floor = ranked[tier.len() - 1].closeness_norm;
    let below = ranked[tier.len()].closeness_norm;
    ensure!(tier_floor > below, "tier not strict: {tier_floor} vs {below}");
    for t in GUARDIAN_CLOSENESS_TERMS {
        ensure!(tier.contains(t), "{t} outside the top tier");
    }
    Ok(format!(
        "200 graphs, max |diff| {worst:.1e}; top tier = {} terms with membership >= {named_min}, floor {tier_floor:.4} > next {below:.4}",
        tier.len()
    ))
}

fn recovery_fit() -> (SyntheticLda, Vec<Vec<f64>>, LdaModel, Duration) {
    let gen = SyntheticLda::blocks(3, 10);
    let sample = gen.sample();
    let matrix = dtm_of(&sample.docs);
    let start = Instant::now();
    let model = topicmodel::fit_lda(&matrix, &LdaConfig::new(3).with_iterations(500, 200).with_seed(42)).expect("fit");
    let elapsed = start.elapsed();
    // reorder the true topics to the matrix's (sorted) vocabulary
    let order: Vec<usize> = matrix
        .vocabulary()
        .iter()
        .map(|w| sample.vocab.iter().position(|v| v == w).expect("known word"))
        .collect();
    let truth = sample
        .phi
        .iter()
        .map(|row| order.iter().map(|&i| row[i]).collect())
        .collect();
    (gen, truth, model, elapsed)
}

fn lda_recovery() -> Outcome {
    let (gen, truth, model, elapsed) = recovery_fit();
    ensure!(
        gen.vocab.len() == 30 && gen.n_docs == 200 && gen.doc_len == 50,
        "generator shape"
    );
    let aligned = greedy_alignment(&model.phi, &truth);
    let cosines: Vec<String> = aligned.iter().map(|(_, _, c)| format!("{c:.4}")).collect();
    for (i, j, c) in &aligned {
        ensure!(*c >= 0.9, "topic {i} best aligned to {j} with cosine {c:.4}");
    }
    within(Duration::from_secs(60), elapsed)?;
    Ok(format!("cosines [{}], fit {:.2?}", cosines.join(", "), elapsed))
}

fn row_sums_ok(model: &LdaModel) -> Result<(), String> {
    for (k, row) in model.phi.iter().enumerate() {
        let s: f64 = row.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-9, "phi row {k} sums to {s}");
    }
    for (d, row) in model.theta.iter().enumerate() {
        let s: f64 = row.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-9, "theta row {d} sums to {s}");
    }
    Ok(())
}

fn lda_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut models = 0;
    let mut checkpoints = 0;
    for case in 0..20 {
        let docs = random_corpus(&mut rng, 15, 25);
        let lists: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
        if lists.iter().all(|d| d.is_empty()) {
            continue;
        }
        let matrix = dtm_of(&lists);
        let k = rng.random_range(1..=matrix.n_terms().min(4));
        let iters = rng.random_range(2..40);
        let cfg = LdaConfig::new(k)
            .with_iterations(iters, iters / 3)
            .with_seed(rng.random());
        let mut sampler = GibbsSampler::new(&matrix, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let mid = iters / 2;
        while !sampler.is_finished() {
            sampler.sweep();
            let done = sampler.sweeps_done();
            if done == 1 || done == mid || done == iters {
                sampler
                    .check_conservation()
                    .map_err(|e| format!("case {case}, sweep {done}: {e}"))?;
                checkpoints += 1;
            }
        }
        let model = sampler.finish();
        row_sums_ok(&model).map_err(|e| format!("case {case}: {e}"))?;
        models += 1;

        let a = topicmodel::fit_lda(&matrix, &cfg).map_err(|e| e.to_string())?;
        let b = topicmodel::fit_lda(&matrix, &cfg).map_err(|e| e.to_string())?;
        let (ja, jb) = (
            a.to_json(true).map_err(|e| e.to_string())?,
            b.to_json(true).map_err(|e| e.to_string())?,
        );
        ensure!(ja == jb, "case {case}: equal seeds gave different models");
        ensure!(a == model, "case {case}: stepped sampler differs from fit_lda");
    }
    let (_, _, recovered, _) = recovery_fit();
    row_sums_ok(&recovered)?;
    models += 1;
    Ok(format!(
        "{models} models, {checkpoints} conservation checkpoints, seeded reruns byte-identical"
    ))
}

fn dtm_cooc_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut trims = 0;
    for case in 0..100 {
        let docs = random_corpus(&mut rng, 20, 50);
        let (vocab, dense) = count_nested(&docs);
        let built = dtm::build_dtm(&docs);
        if vocab.is_empty() {
            ensure!(built.is_err(), "case {case}: token-free corpus should be rejected");
            continue;
        }
        let m = built.map_err(|e| format!("case {case}: {e}"))?;
        ensure!(m.vocabulary() == vocab.as_slice(), "case {case}: vocabulary");
        ensure!(m.to_dense() == dense, "case {case}: counts");
        let ids: Vec<String> = docs.iter().map(|d| d.article_id.clone()).collect();
        ensure!(m.doc_ids() == ids.as_slice(), "case {case}: document order");

        let graph = coocnet::cooccurrence(&m, CoocMode::Binary);
        let got: BTreeMap<(String, String), u64> = graph
            .edges
            .iter()
            .map(|(&(a, b), &w)| {
                let (x, y) = (graph.nodes[a].clone(), graph.nodes[b].clone());
                (if x < y { (x, y) } else { (y, x) }, w)
            })
            .collect();
        ensure!(got == binary_cooc_dense(&dense, &vocab), "case {case}: co-occurrence");

        let millis = rng.random_range(1..=1000u64);
        let n = dense.len() as u64;
        let keep: Vec<String> = vocab
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let doc_count = dense.iter().filter(|row| row[*j] > 0).count() as u64;
                1000 * (n - doc_count) <= millis * n
            })
            .map(|(_, t)| t.clone())
            .collect();
        match dtm::trim_sparse(&m, millis as f64 / 1000.0) {
            Ok(t) => {
                ensure!(t.vocabulary() == keep.as_slice(), "case {case}: trim at {millis}/1000");
                let expected: Vec<Vec<u32>> = dense
                    .iter()
                    .map(|row| {
                        vocab
                            .iter()
                            .zip(row)
                            .filter(|(term, _)| keep.contains(term))
                            .map(|(_, &c)| c)
                            .collect()
                    })
                    .collect();
                ensure!(t.to_dense() == expected, "case {case}: trimmed counts");
            }
            Err(DtmError::AllTermsRemoved(_)) => ensure!(keep.is_empty(), "case {case}: trim removed everything"),
            Err(e) => return Err(format!("case {case}: {e}")),
        }
        trims += 1;
    }
    Ok(format!(
        "100 corpora, {trims} with terms: dtm, co-occurrence and trim exact"
    ))
}

fn sentiment_checks() -> Outcome {
    let lexicon = Lexicon::bundled("en").map_err(|e| e.to_string())?;
    let words: Vec<&String> = lexicon.entries.keys().collect();
    let filler = ["coronavirus", "report", "city", "minister", "week"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let token_list = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..rng.random_range(0..40))
            .map(|_| {
                if rng.random_bool(0.5) {
                    words.choose(rng).unwrap().to_string()
                } else {
                    filler.choose(rng).unwrap().to_string()
                }
            })
            .collect()
    };
    for case in 0..100 {
        let a = token_list(&mut rng);
        let b = token_list(&mut rng);
        let joined: Vec<String> = a.iter().chain(&b).cloned().collect();
        let (sa, sb, sj) = (
            score_document(&a, &lexicon),
            score_document(&b, &lexicon),
            score_document(&joined, &lexicon),
        );
        ensure!(
            sj.score == sa.score + sb.score && sj.matched == sa.matched + sb.matched,
            "case {case}: additivity"
        );
    }

    // 30-day random fixture against a group-by
    let mut docs: Vec<TokenizedDoc> = Vec::new();
    for i in 0..120 {
        let day = date(2020, 1, 1) + chrono::Days::new(rng.random_range(0..30));
        let tokens = token_list(&mut rng);
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        docs.push(doc(&format!("r{i}"), day, &refs));
    }
    let series = sentiment::sentiment_series(&docs, &lexicon, Bucket::Day);
    let mut groups: BTreeMap<chrono::NaiveDate, Vec<i64>> = BTreeMap::new();
    for d in &docs {
        let mut s = 0i64;
        for t in &d.tokens {
            s += i64::from(lexicon.entries.get(t).copied().unwrap_or(0));
        }
        groups.entry(d.published_at).or_default().push(s);
    }
    ensure!(
        series.points.len() == groups.len(),
        "series has {} days, oracle {}",
        series.points.len(),
        groups.len()
    );
    for (p, (day, scores)) in series.points.iter().zip(&groups) {
        let total: i64 = scores.iter().sum();
        let mean = total as f64 / scores.len() as f64;
        ensure!(
            p.date == *day
                && p.doc_count == scores.len()
                && p.total_polarity == total as f64
                && p.mean_polarity == mean,
            "day {day}: {p:?} vs total {total}, {} docs",
            scores.len()
        );
    }

    let (text, fixture) = three_trough_fixture();
    let (lex, _) = Lexicon::parse(&text, "en").map_err(|e| e.to_string())?;
    let troughs = sentiment::sentiment_series(&fixture, &lex, Bucket::Day);
    let peaks = sentiment::find_peaks(&troughs, 3, 2.0);
    let expected = vec![date(2020, 1, 25), date(2020, 2, 15), date(2020, 3, 11)];
    ensure!(peaks == expected, "peaks {peaks:?}");
    Ok(format!(
        "additivity on 100 lists, group-by over {} days, peaks {}",
        groups.len(),
        peaks.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" / ")
    ))
}

fn pipeline_determinism() -> Outcome {
    let articles = synthetic_articles(500, 2020);
    let lines: Vec<String> = articles.iter().map(|a| a.to_record()).collect();
    let mut config = PipelineConfig::new("synthetic");
    config.lda = LdaConfig::new(3);
    let mut runs = Vec::new();
    for _ in 0..2 {
        // separate data directories so the second run recomputes
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store = CorpusStore::open(dir.path()).map_err(|e| e.to_string())?;
        let report = store.ingest_documents("synthetic", &lines).map_err(|e| e.to_string())?;
        ensure!(report.accepted == 500, "ingested {}", report.accepted);
        let bundles = BundleStore::open(dir.path()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let bundle = run_pipeline(&store, &bundles, &config, |_| {}).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let bytes = bundles.bytes(&bundle.bundle_id).map_err(|e| e.to_string())?;
        runs.push((bundle.bundle_id, bytes, elapsed));
    }
    ensure!(runs[0].0 == runs[1].0, "bundle ids differ");
    ensure!(runs[0].1 == runs[1].1, "bundle bytes differ");
    for (_, _, t) in &runs {
        within(Duration::from_secs(60), *t)?;
    }
    Ok(format!(
        "bundle {} ({} bytes) twice; runs {:.2?} / {:.2?}",
        runs[0].0,
        runs[0].1.len(),
        runs[0].2,
        runs[1].2
    ))
}

fn seeded_clusters() -> Outcome {
    let gen = SyntheticLda::from_clusters(&SEEDED_CLUSTERS);
    let sample = gen.sample();
    let matrix = dtm_of(&sample.docs);
    let model = topicmodel::fit_lda(&matrix, &LdaConfig::new(5).with_iterations(500, 200).with_seed(42))
        .map_err(|e| e.to_string())?;
    let terms = topicmodel::top_terms_per_topic(&model, 4);
    let cluster_of = |term: &str| SEEDED_CLUSTERS.iter().position(|c| c.contains(&term));
    let mut used = BTreeSet::new();
    let mut heads = Vec::new();
    for topic in &terms.topics {
        let clusters: BTreeSet<Option<usize>> = topic.terms.iter().map(|w| cluster_of(&w.term)).collect();
        let names: Vec<&str> = topic.terms.iter().map(|w| w.term.as_str()).collect();
        ensure!(
            clusters.len() == 1,
            "topic {} mixes clusters: {:?}",
            topic.topic + 1,
            names
        );
        let c = clusters.into_iter().next().flatten().ok_or("unknown term")?;
        used.insert(c);
        heads.push(names.join(","));
    }
    ensure!(used.len() == 5, "only {} distinct clusters recovered", used.len());
    Ok(heads.join(" | "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("two-mode degree fixture", two_mode_degree),
        ("two-mode closeness substitute", two_mode_closeness),
        ("LDA recovery", lda_recovery),
        ("LDA invariants", lda_invariants),
        ("DTM / co-occurrence oracles", dtm_cooc_oracles),
        ("sentiment", sentiment_checks),
        ("pipeline determinism", pipeline_determinism),
        ("seeded-cluster topics", seeded_clusters),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
