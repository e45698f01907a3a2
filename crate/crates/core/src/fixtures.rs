//! Reference data sets with known structure, for tests, demos and
//! benchmarks.
//!
//! * [`guardian_term_topics`]: a five-topic term-topic matrix whose
//!   term memberships follow the degree table reported for the Guardian
//!   analysis (people and virus in four topics, health, outbreak and china in
//!   three, and so on), padded to 20 terms per topic with single-topic terms.
//! * [`SyntheticLda`]: draws documents from known topic-word and
//!   document-topic distributions.
//! * [`synthetic_articles`]: dated news-like articles for end-to-end runs.

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::corpus::Article;
use crate::topicmodel::TermTopicMatrix;

/// Number of topics each named term belongs to in the Guardian fixture.
pub const GUARDIAN_MEMBERSHIPS: &[(&str, usize)] = &[
    ("people", 4),
    ("virus", 4),
    ("health", 3),
    ("outbreak", 3),
    ("china", 3),
    ("public", 2),
    ("uk", 2),
    ("government", 2),
    ("world", 2),
    ("cases", 2),
    ("wuhan", 2),
    ("masks", 1),
    ("staff", 1),
    ("home", 1),
    ("patients", 1),
];

/// Terms reported with the highest closeness in the Guardian network.
pub const GUARDIAN_CLOSENESS_TERMS: &[&str] = &["outbreak", "virus", "china", "government", "world"];

const GUARDIAN_TOPICS: [&[&str]; 5] = [
    &[
        "people",
        "health",
        "masks",
        "staff",
        "virus",
        "public",
        "uk",
        "patients",
        "hospital",
        "nurses",
        "doctors",
        "ppe",
        "equipment",
        "gloves",
        "gowns",
        "shortage",
        "ward",
        "intensive",
        "ventilators",
        "care",
    ],
    &[
        "global",
        "government",
        "economy",
        "travel",
        "people",
        "outbreak",
        "china",
        "uk",
        "world",
        "markets",
        "trade",
        "stocks",
        "oil",
        "growth",
        "recession",
        "bank",
        "flights",
        "business",
        "jobs",
        "prices",
    ],
    &[
        "cases",
        "virus",
        "china",
        "health",
        "government",
        "wuhan",
        "beijing",
        "hubei",
        "province",
        "quarantine",
        "lockdown",
        "authorities",
        "measures",
        "infections",
        "confirmed",
        "deaths",
        "city",
        "residents",
        "officials",
        "containment",
    ],
    &[
        "people",
        "virus",
        "outbreak",
        "flu",
        "health",
        "china",
        "cases",
        "wuhan",
        "sars",
        "respiratory",
        "symptoms",
        "pathogen",
        "infection",
        "mortality",
        "rate",
        "transmission",
        "scientists",
        "vaccine",
        "genome",
        "bats",
    ],
    &[
        "time",
        "people",
        "public",
        "disease",
        "virus",
        "outbreak",
        "world",
        "home",
        "media",
        "news",
        "social",
        "misinformation",
        "fear",
        "panic",
        "twitter",
        "information",
        "response",
        "community",
        "experts",
        "reports",
    ],
];

/// Five topics of 20 ranked terms each; weights decrease linearly with rank
/// and sum to 1 per topic.
pub fn guardian_term_topics() -> TermTopicMatrix {
    TermTopicMatrix::from_topic_lists(
        GUARDIAN_TOPICS
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .enumerate()
                    .map(|(rank, t)| (t.to_string(), (20 - rank) as f64 / 210.0))
                    .collect()
            })
            .collect(),
    )
}

/// Five seeded vocabulary clusters in the spirit of the Guardian topics.
pub const SEEDED_CLUSTERS: [&[&str]; 5] = [
    &[
        "masks",
        "staff",
        "hospital",
        "nurses",
        "doctors",
        "ppe",
        "ventilators",
        "gloves",
        "ward",
        "patients",
    ],
    &[
        "global",
        "government",
        "economy",
        "travel",
        "markets",
        "trade",
        "stocks",
        "recession",
        "flights",
        "jobs",
    ],
    &[
        "cases",
        "china",
        "wuhan",
        "beijing",
        "hubei",
        "quarantine",
        "lockdown",
        "province",
        "authorities",
        "residents",
    ],
    &[
        "flu",
        "sars",
        "respiratory",
        "symptoms",
        "pathogen",
        "transmission",
        "genome",
        "bats",
        "mortality",
        "scientists",
    ],
    &[
        "media",
        "news",
        "social",
        "misinformation",
        "twitter",
        "information",
        "community",
        "experts",
        "reports",
        "time",
    ],
];

/// Generator for LDA corpora with known parameters.
#[derive(Debug, Clone)]
pub struct SyntheticLda {
    pub vocab: Vec<String>,
    /// Topic `k` concentrates on `clusters[k]` (indices into `vocab`).
    pub clusters: Vec<Vec<usize>>,
    /// Mass each topic puts on its own cluster; the rest is spread evenly
    /// over the other words.
    pub support_mass: f64,
    /// Symmetric Dirichlet concentration of document mixtures.
    pub doc_concentration: f64,
    pub n_docs: usize,
    pub doc_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub vocab: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub docs: Vec<Vec<String>>,
}

impl SyntheticLda {
    /// `k` topics over `k * words_per_topic` words named `w000`, `w001`, ...
    pub fn blocks(k: usize, words_per_topic: usize) -> Self {
        let v = k * words_per_topic;
        Self {
            vocab: (0..v).map(|i| format!("w{i:03}")).collect(),
            clusters: (0..k)
                .map(|t| (t * words_per_topic..(t + 1) * words_per_topic).collect())
                .collect(),
            support_mass: 0.95,
            doc_concentration: 0.3,
            n_docs: 200,
            doc_len: 50,
            seed: 2020,
        }
    }

    /// One topic per seeded cluster.
    pub fn from_clusters(clusters: &[&[&str]]) -> Self {
        let mut vocab = Vec::new();
        let mut idx = Vec::new();
        for c in clusters {
            idx.push((vocab.len()..vocab.len() + c.len()).collect());
            vocab.extend(c.iter().map(|s| s.to_string()));
        }
        Self {
            vocab,
            clusters: idx,
            support_mass: 0.95,
            doc_concentration: 0.2,
            n_docs: 300,
            doc_len: 60,
            seed: 2020,
        }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn phi(&self) -> Vec<Vec<f64>> {
        let v = self.vocab.len();
        self.clusters
            .iter()
            .map(|cluster| {
                let inside = self.support_mass / cluster.len() as f64;
                let outside = if v > cluster.len() {
                    (1.0 - self.support_mass) / (v - cluster.len()) as f64
                } else {
                    0.0
                };
                let mut row = vec![outside; v];
                for &w in cluster {
                    row[w] = inside;
                }
                row
            })
            .collect()
    }

    pub fn sample(&self) -> SyntheticSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let phi = self.phi();
        let word_dists: Vec<WeightedIndex<f64>> = phi
            .iter()
            .map(|row| WeightedIndex::new(row).expect("valid topic row"))
            .collect();
        let gamma = Gamma::new(self.doc_concentration, 1.0).expect("positive concentration");
        let mut theta = Vec::with_capacity(self.n_docs);
        let mut docs = Vec::with_capacity(self.n_docs);
        for _ in 0..self.n_docs {
            let mut mix: Vec<f64> = (0..self.k()).map(|_| gamma.sample(&mut rng).max(1e-300)).collect();
            let sum: f64 = mix.iter().sum();
            mix.iter_mut().for_each(|x| *x /= sum);
            let topic_dist = WeightedIndex::new(&mix).expect("valid mixture");
            let doc = (0..self.doc_len)
                .map(|_| {
                    let t = topic_dist.sample(&mut rng);
                    self.vocab[word_dists[t].sample(&mut rng)].clone()
                })
                .collect();
            theta.push(mix);
            docs.push(doc);
        }
        SyntheticSample {
            vocab: self.vocab.clone(),
            phi,
            theta,
            docs,
        }
    }
}

const POSITIVE_WORDS: &[&str] = &["hope", "recovery", "support", "relief", "progress"];
const NEGATIVE_WORDS: &[&str] = &["crisis", "fear", "deaths", "panic", "emergency"];

/// `n_docs` English articles from the seeded clusters, one publication day
/// per article cycling through 2020-01-04..=2020-03-11, with a few
/// sentiment-bearing words and stopwords mixed in.
pub fn synthetic_articles(n_docs: usize, seed: u64) -> Vec<Article> {
    let mut gen = SyntheticLda::from_clusters(&SEEDED_CLUSTERS);
    gen.n_docs = n_docs;
    gen.doc_len = 40;
    gen.seed = seed;
    let sample = gen.sample();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 4).expect("valid date");
    let span = 68u64;
    sample
        .docs
        .into_iter()
        .enumerate()
        .map(|(i, words)| {
            let mut body: Vec<String> = Vec::with_capacity(words.len() * 2);
            for w in words {
                if rng.random_bool(0.15) {
                    body.push("the".into());
                }
                body.push(w);
            }
            for _ in 0..rng.random_range(0..4u32) {
                let pool = if rng.random_bool(0.7) {
                    NEGATIVE_WORDS
                } else {
                    POSITIVE_WORDS
                };
                body.push(pool[rng.random_range(0..pool.len() as u32) as usize].to_string());
            }
            Article {
                id: format!("syn-{i:05}"),
                source: if i % 3 == 0 { "the-guardian" } else { "nyt" }.to_string(),
                language: "en".to_string(),
                published_at: start + Days::new(i as u64 % span),
                title: format!("Coronavirus update {}", i + 1),
                body: body.join(" ") + ".",
            }
        })
        .collect()
}
