//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Each token's topic is resampled from
//!
//! ```text
//! p(z = k | rest) ∝ (n_dk + α) · (n_kv + β) / (n_k + V·β)
//! ```
//!
//! where the counts exclude the token being resampled. After burn-in the
//! count tables are accumulated every `thin` sweeps and the topic-word
//! (`phi`) and document-topic (`theta`) distributions are read off the
//! averaged counts with the Dirichlet priors as smoothing.
//!
//! The random source is ChaCha8 seeded from the configured 64-bit seed;
//! only 32-bit range draws and 53-bit float draws are used, so a chain is
//! reproducible bit for bit on every platform.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtm::DocumentTermMatrix;

pub const DEFAULT_TOP_N: usize = 20;
const MODEL_FORMAT: &str = "cometa-lda";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("invalid LDA configuration: {0}")]
    Config(String),
    #[error("K = {k} topics exceeds vocabulary size V = {v}")]
    TooManyTopics { k: usize, v: usize },
    #[error("document index {index} out of range (model has {docs} documents)")]
    DocOutOfRange { index: usize, docs: usize },
    #[error("model and matrix disagree: {0}")]
    Mismatch(String),
    #[error("count conservation violated: {0}")]
    Conservation(String),
    #[error("unsupported model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    /// Number of topics.
    pub k: usize,
    /// Document-topic prior.
    pub alpha: f64,
    /// Topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Sweeps between accumulated samples after burn-in.
    #[serde(default = "default_thin")]
    pub thin: usize,
}

fn default_thin() -> usize {
    10
}

impl LdaConfig {
    /// Defaults: α = 50/K, β = 0.01, 1000 sweeps with 200 burn-in, every
    /// 10th sweep averaged.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            seed: 42,
            thin: default_thin(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize, burn_in: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self
    }

    pub fn with_priors(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn validate(&self, vocabulary_size: usize) -> Result<(), LdaError> {
        if self.k == 0 {
            return Err(LdaError::Config("K must be at least 1".into()));
        }
        if self.k > u32::MAX as usize {
            return Err(LdaError::Config("K too large".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LdaError::Config("alpha and beta must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(LdaError::Config("iterations must be at least 1".into()));
        }
        if self.iterations <= self.burn_in {
            return Err(LdaError::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(LdaError::Config("thin must be at least 1".into()));
        }
        if self.k > vocabulary_size {
            return Err(LdaError::TooManyTopics {
                k: self.k,
                v: vocabulary_size,
            });
        }
        Ok(())
    }
}

/// Sampler state for one chain. Exposed so callers can observe the chain
/// between sweeps; [`fit_lda`] drives it to completion.
pub struct GibbsSampler {
    config: LdaConfig,
    n_terms: usize,
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u32>>,
    /// D×K
    ndk: Vec<u32>,
    /// K×V
    nkv: Vec<u32>,
    nk: Vec<u32>,
    sum_ndk: Vec<f64>,
    sum_nkv: Vec<f64>,
    sum_nk: Vec<f64>,
    samples: usize,
    sweeps: usize,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
}

impl GibbsSampler {
    /// Expand the matrix into token sequences and draw initial topics
    /// uniformly.
    pub fn new(dtm: &DocumentTermMatrix, config: &LdaConfig) -> Result<Self, LdaError> {
        config.validate(dtm.n_terms())?;
        let k = config.k;
        let v = dtm.n_terms();
        let d = dtm.n_docs();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let docs: Vec<Vec<u32>> = dtm
            .rows()
            .map(|row| {
                row.iter()
                    .flat_map(|&(t, c)| std::iter::repeat_n(t as u32, c as usize))
                    .collect()
            })
            .collect();

        let mut ndk = vec![0u32; d * k];
        let mut nkv = vec![0u32; k * v];
        let mut nk = vec![0u32; k];
        let z: Vec<Vec<u32>> = docs
            .iter()
            .enumerate()
            .map(|(di, tokens)| {
                tokens
                    .iter()
                    .map(|&w| {
                        let topic = rng.random_range(0..k as u32);
                        let t = topic as usize;
                        ndk[di * k + t] += 1;
                        nkv[t * v + w as usize] += 1;
                        nk[t] += 1;
                        topic
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            config: config.clone(),
            n_terms: v,
            docs,
            z,
            ndk,
            nkv,
            nk,
            sum_ndk: vec![0.0; d * k],
            sum_nkv: vec![0.0; k * v],
            sum_nk: vec![0.0; k],
            samples: 0,
            sweeps: 0,
            rng,
            weights: vec![0.0; k],
            vocab: dtm.vocabulary().to_vec(),
            doc_ids: dtm.doc_ids().to_vec(),
        })
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    pub fn is_finished(&self) -> bool {
        self.sweeps >= self.config.iterations
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.z
    }

    /// Resample every token once, in document order.
    pub fn sweep(&mut self) {
        let k = self.config.k;
        let v = self.n_terms;
        let alpha = self.config.alpha;
        let beta = self.config.beta;
        let v_beta = v as f64 * beta;

        for (d, tokens) in self.docs.iter().enumerate() {
            let ndk = &mut self.ndk[d * k..(d + 1) * k];
            for (i, &w) in tokens.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                ndk[old] -= 1;
                self.nkv[old * v + w] -= 1;
                self.nk[old] -= 1;

                let mut total = 0.0;
                #[allow(clippy::needless_range_loop)]
                for t in 0..k {
                    total +=
                        (ndk[t] as f64 + alpha) * (self.nkv[t * v + w] as f64 + beta) / (self.nk[t] as f64 + v_beta);
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                ndk[new] += 1;
                self.nkv[new * v + w] += 1;
                self.nk[new] += 1;
                self.z[d][i] = new as u32;
            }
        }
        self.sweeps += 1;

        let past_burn_in = self.sweeps.saturating_sub(self.config.burn_in);
        if past_burn_in > 0 && past_burn_in.is_multiple_of(self.config.thin) {
            self.accumulate();
        }
    }

    fn accumulate(&mut self) {
        for (s, &c) in self.sum_ndk.iter_mut().zip(&self.ndk) {
            *s += c as f64;
        }
        for (s, &c) in self.sum_nkv.iter_mut().zip(&self.nkv) {
            *s += c as f64;
        }
        for (s, &c) in self.sum_nk.iter_mut().zip(&self.nk) {
            *s += c as f64;
        }
        self.samples += 1;
    }

    /// Check that the count tables agree with each other and with the
    /// current assignments.
    pub fn check_conservation(&self) -> Result<(), LdaError> {
        let k = self.config.k;
        let v = self.n_terms;
        for (d, tokens) in self.docs.iter().enumerate() {
            let row: u64 = self.ndk[d * k..(d + 1) * k].iter().map(|&c| c as u64).sum();
            if row != tokens.len() as u64 {
                return Err(LdaError::Conservation(format!(
                    "document {d}: sum_k n_dk = {row}, length {}",
                    tokens.len()
                )));
            }
        }
        for t in 0..k {
            let row: u64 = self.nkv[t * v..(t + 1) * v].iter().map(|&c| c as u64).sum();
            if row != self.nk[t] as u64 {
                return Err(LdaError::Conservation(format!(
                    "topic {t}: sum_v n_kv = {row}, n_k = {}",
                    self.nk[t]
                )));
            }
        }
        let mut ndk = vec![0u32; self.ndk.len()];
        let mut nkv = vec![0u32; self.nkv.len()];
        for (d, (tokens, topics)) in self.docs.iter().zip(&self.z).enumerate() {
            for (&w, &t) in tokens.iter().zip(topics) {
                ndk[d * k + t as usize] += 1;
                nkv[t as usize * v + w as usize] += 1;
            }
        }
        if ndk != self.ndk || nkv != self.nkv {
            return Err(LdaError::Conservation("count tables disagree with assignments".into()));
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.sweep();
        }
    }

    /// Read off `phi` and `theta` from the averaged counts (or the current
    /// counts if no sample was accumulated).
    pub fn finish(self) -> LdaModel {
        let k = self.config.k;
        let v = self.n_terms;
        let (ndk, nkv, nk): (Vec<f64>, Vec<f64>, Vec<f64>) = if self.samples == 0 {
            (
                self.ndk.iter().map(|&c| c as f64).collect(),
                self.nkv.iter().map(|&c| c as f64).collect(),
                self.nk.iter().map(|&c| c as f64).collect(),
            )
        } else {
            let s = self.samples as f64;
            (
                self.sum_ndk.iter().map(|c| c / s).collect(),
                self.sum_nkv.iter().map(|c| c / s).collect(),
                self.sum_nk.iter().map(|c| c / s).collect(),
            )
        };
        let alpha = self.config.alpha;
        let beta = self.config.beta;

        let phi = (0..k)
            .map(|t| {
                let denom = nk[t] + v as f64 * beta;
                normalize((0..v).map(|w| (nkv[t * v + w] + beta) / denom).collect())
            })
            .collect();
        let theta = self
            .docs
            .iter()
            .enumerate()
            .map(|(d, tokens)| {
                let denom = tokens.len() as f64 + k as f64 * alpha;
                normalize((0..k).map(|t| (ndk[d * k + t] + alpha) / denom).collect())
            })
            .collect();

        LdaModel {
            config: self.config,
            vocab: self.vocab,
            doc_ids: self.doc_ids,
            phi,
            theta,
            assignments: Some(self.z),
        }
    }
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    for x in &mut row {
        *x /= sum;
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// K×V topic-word distributions.
    pub phi: Vec<Vec<f64>>,
    /// D×K document-topic mixtures.
    pub theta: Vec<Vec<f64>>,
    /// Final topic of every token, per document in matrix order.
    pub assignments: Option<Vec<Vec<u32>>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: LdaModel,
}

impl LdaModel {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn n_docs(&self) -> usize {
        self.theta.len()
    }

    pub fn doc_topic(&self, doc: usize) -> Result<&[f64], LdaError> {
        self.theta.get(doc).map(Vec::as_slice).ok_or(LdaError::DocOutOfRange {
            index: doc,
            docs: self.theta.len(),
        })
    }

    /// Relabel topics: new topic `i` is old topic `perm[i]`.
    pub fn permute_topics(&self, perm: &[usize]) -> LdaModel {
        assert_eq!(perm.len(), self.k(), "permutation length");
        let mut inverse = vec![0u32; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new as u32;
        }
        LdaModel {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            doc_ids: self.doc_ids.clone(),
            phi: perm.iter().map(|&old| self.phi[old].clone()).collect(),
            theta: self
                .theta
                .iter()
                .map(|row| perm.iter().map(|&old| row[old]).collect())
                .collect(),
            assignments: self.assignments.as_ref().map(|z| {
                z.iter()
                    .map(|doc| doc.iter().map(|&t| inverse[t as usize]).collect())
                    .collect()
            }),
        }
    }

    /// Versioned JSON container. `with_assignments = false` drops `z`.
    pub fn to_json(&self, with_assignments: bool) -> Result<String, LdaError> {
        let mut model = self.clone();
        if !with_assignments {
            model.assignments = None;
        }
        Ok(serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, LdaError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(LdaError::Format(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(LdaError::Format(format!("unsupported version {}", file.version)));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path, with_assignments: bool) -> Result<(), LdaError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_json(with_assignments)?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LdaError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn fit_lda(dtm: &DocumentTermMatrix, config: &LdaConfig) -> Result<LdaModel, LdaError> {
    let mut sampler = GibbsSampler::new(dtm, config)?;
    sampler.run_to_end();
    Ok(sampler.finish())
}

/// Independent chains, one per config, run in parallel.
pub fn fit_chains(dtm: &DocumentTermMatrix, configs: &[LdaConfig]) -> Result<Vec<LdaModel>, LdaError> {
    configs.par_iter().map(|c| fit_lda(dtm, c)).collect()
}

/// `Σ_d Σ_tokens ln Σ_k θ_dk φ_kv` over the matrix the model was fitted on.
pub fn log_likelihood(model: &LdaModel, dtm: &DocumentTermMatrix) -> Result<f64, LdaError> {
    if model.vocab.as_slice() != dtm.vocabulary() {
        return Err(LdaError::Mismatch("vocabularies differ".into()));
    }
    if model.n_docs() != dtm.n_docs() {
        return Err(LdaError::Mismatch(format!(
            "model has {} documents, matrix has {}",
            model.n_docs(),
            dtm.n_docs()
        )));
    }
    let k = model.k();
    Ok((0..dtm.n_docs())
        .map(|d| {
            let theta = &model.theta[d];
            dtm.row(d)
                .iter()
                .map(|&(v, c)| {
                    let p: f64 = (0..k).map(|t| theta[t] * model.phi[t][v]).sum();
                    c as f64 * p.ln()
                })
                .sum::<f64>()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTerms {
    pub topic: usize,
    /// Ranked by weight descending, ties by term.
    pub terms: Vec<WeightedTerm>,
}

/// The top terms of each topic with their topic-word probabilities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermTopicMatrix {
    pub topics: Vec<TopicTerms>,
}

impl TermTopicMatrix {
    /// Build from ranked per-topic lists; topic ids are list positions.
    pub fn from_topic_lists(lists: Vec<Vec<(String, f64)>>) -> Self {
        Self {
            topics: lists
                .into_iter()
                .enumerate()
                .map(|(topic, terms)| TopicTerms {
                    topic,
                    terms: terms
                        .into_iter()
                        .map(|(term, weight)| WeightedTerm { term, weight })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.topics.len()
    }

    /// Distinct selected terms, sorted.
    pub fn terms(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .topics
            .iter()
            .flat_map(|t| t.terms.iter().map(|w| w.term.clone()))
            .collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn weight(&self, term: &str, topic: usize) -> Option<f64> {
        self.topics
            .iter()
            .find(|t| t.topic == topic)?
            .terms
            .iter()
            .find(|w| w.term == term)
            .map(|w| w.weight)
    }

    /// Long format CSV: `topic,rank,term,weight` (topic and rank 1-based).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["topic", "rank", "term", "weight"])?;
        for t in &self.topics {
            for (r, term) in t.terms.iter().enumerate() {
                w.write_record([
                    (t.topic + 1).to_string(),
                    (r + 1).to_string(),
                    term.term.clone(),
                    term.weight.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Wide table: one column per topic, one row per rank.
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.topics.iter().map(|t| format!("Topic {}", t.topic + 1)))?;
        let depth = self.topics.iter().map(|t| t.terms.len()).max().unwrap_or(0);
        for r in 0..depth {
            w.write_record(
                self.topics
                    .iter()
                    .map(|t| t.terms.get(r).map(|x| x.term.as_str()).unwrap_or("")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The `n` highest-probability terms of every topic.
pub fn top_terms_per_topic(model: &LdaModel, n: usize) -> TermTopicMatrix {
    TermTopicMatrix {
        topics: model
            .phi
            .iter()
            .enumerate()
            .map(|(topic, row)| {
                let mut order: Vec<usize> = (0..row.len()).collect();
                order.sort_by(|&a, &b| {
                    row[b]
                        .total_cmp(&row[a])
                        .then_with(|| model.vocab[a].cmp(&model.vocab[b]))
                });
                TopicTerms {
                    topic,
                    terms: order
                        .into_iter()
                        .take(n)
                        .map(|v| WeightedTerm {
                            term: model.vocab[v].clone(),
                            weight: row[v],
                        })
                        .collect(),
                }
            })
            .collect(),
    }
}
