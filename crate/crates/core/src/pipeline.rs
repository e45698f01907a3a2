//! End-to-end analysis job: corpus slice → tokens → DTM → sentiment,
//! co-occurrence network, LDA and the topics-terms network, persisted as a
//! content-addressed bundle.
//!
//! Bundle layout:
//! ```text
//! {root}/bundles/{bundle-id}/
//! ├── bundle.json          # every section, canonical serialization
//! ├── manifest.json        # creation time + SHA-256 of each file
//! ├── config.json
//! ├── topterms.csv
//! ├── sentiment.csv
//! ├── coocnet_edges.csv, coocnet_centrality.csv, coocnet.graphml
//! ├── topics.csv, topics_table.csv, model.json
//! ├── topicnet_edges.csv, topicnet_centrality.csv, topicnet.graphml
//! └── dtm.tsv, vocabulary.txt, documents.txt
//! ```
//! The id hashes the config together with the corpus snapshot, lexicon and
//! stopword contents, so identical inputs always map to the same directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coocnet::{self, CentralityTable, CoocMode};
use crate::corpus::{CorpusFilter, CorpusStats, CorpusStore, CorpusView};
use crate::dtm::{self, DocumentTermMatrix, TermFrequency};
use crate::export::GraphFormat;
use crate::preprocess::{self, PreprocessConfig};
use crate::sentiment::{self, Bucket, Lexicon, SentimentSeries};
use crate::topicmodel::{self, LdaConfig, LdaModel, TermTopicMatrix};
use crate::topicnet::{self, BipartiteCentrality, BipartiteGraph, BridgeTerm};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Corpus,
    Preprocess,
    Dtm,
    Sentiment,
    Coocnet,
    Topicmodel,
    Topicnet,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Corpus => "corpus",
            Stage::Preprocess => "preprocess",
            Stage::Dtm => "dtm",
            Stage::Sentiment => "sentiment",
            Stage::Coocnet => "coocnet",
            Stage::Topicmodel => "topicmodel",
            Stage::Topicnet => "topicnet",
            Stage::Persist => "persist",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
    /// Retryable store conditions (writer lock held).
    pub retryable: bool,
}

impl PipelineError {
    fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
        move |e| PipelineError {
            stage,
            message: e.to_string(),
            retryable: false,
        }
    }
}

/// Preprocessing options as they appear in a job config; stopwords are
/// resolved from the bundled list or `stopwords_file`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessSettings {
    pub language: String,
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub strip_digits: bool,
    pub min_token_len: usize,
    pub stopwords_file: Option<PathBuf>,
    pub extra_stopwords: BTreeSet<String>,
    pub stemming: bool,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            language: "en".into(),
            lowercase: true,
            strip_punctuation: true,
            strip_digits: true,
            min_token_len: 2,
            stopwords_file: None,
            extra_stopwords: BTreeSet::new(),
            stemming: false,
        }
    }
}

impl PreprocessSettings {
    pub fn resolve(&self) -> Result<PreprocessConfig, preprocess::PreprocessError> {
        let stopwords = preprocess::load_stopwords(&self.language, self.stopwords_file.as_deref())?;
        let config = PreprocessConfig {
            language: self.language.clone(),
            lowercase: self.lowercase,
            strip_punctuation: self.strip_punctuation,
            strip_digits: self.strip_digits,
            min_token_len: self.min_token_len,
            stopwords,
            extra_stopwords: self.extra_stopwords.iter().map(|s| s.to_lowercase()).collect(),
            stemming: self.stemming,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakSettings {
    pub window: usize,
    pub min_prominence: f64,
}

impl Default for PeakSettings {
    fn default() -> Self {
        Self {
            window: 3,
            min_prominence: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus_id: String,
    #[serde(default)]
    pub filter: CorpusFilter,
    #[serde(default)]
    pub preprocess: PreprocessSettings,
    #[serde(default = "default_max_sparsity")]
    pub max_sparsity: f64,
    /// Lexicon file; the bundled list of the preprocessing language when absent.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub cooc_mode: CoocMode,
    #[serde(default = "default_min_weight")]
    pub cooc_min_weight: u64,
    #[serde(default = "default_lda")]
    pub lda: LdaConfig,
    /// Terms per topic in the term-topic matrix.
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    /// Length of the frequency ranking (wordcloud / barplot).
    #[serde(default = "default_top_terms")]
    pub top_terms: usize,
    #[serde(default)]
    pub peaks: PeakSettings,
}

fn default_max_sparsity() -> f64 {
    dtm::DEFAULT_MAX_SPARSITY
}
fn default_min_weight() -> u64 {
    coocnet::DEFAULT_MIN_WEIGHT
}
fn default_lda() -> LdaConfig {
    LdaConfig::new(5)
}
fn default_top_n() -> usize {
    topicmodel::DEFAULT_TOP_N
}
fn default_top_terms() -> usize {
    50
}

impl PipelineConfig {
    pub fn new(corpus_id: impl Into<String>) -> Self {
        Self {
            corpus_id: corpus_id.into(),
            filter: CorpusFilter::default(),
            preprocess: PreprocessSettings::default(),
            max_sparsity: default_max_sparsity(),
            lexicon: None,
            cooc_mode: CoocMode::default(),
            cooc_min_weight: default_min_weight(),
            lda: default_lda(),
            top_n: default_top_n(),
            top_terms: default_top_terms(),
            peaks: PeakSettings::default(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialization is infallible");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopTermsSection {
    pub documents: usize,
    pub empty_documents: usize,
    pub vocabulary_size: usize,
    pub terms: Vec<TermFrequency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentSection {
    pub lexicon_size: usize,
    pub series: SentimentSeries,
    pub peaks: Vec<chrono::NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocEdge {
    pub source: String,
    pub target: String,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocSection {
    pub mode: CoocMode,
    pub min_weight: u64,
    pub nodes: Vec<String>,
    pub edges: Vec<CoocEdge>,
    /// Empty when fewer than two terms survive pruning.
    pub centrality: CentralityTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsSection {
    pub k: usize,
    pub log_likelihood: f64,
    pub term_topics: TermTopicMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicNetSection {
    pub graph: BipartiteGraph,
    pub centrality: BipartiteCentrality,
    pub bridges: Vec<BridgeTerm>,
}

/// Everything one job produces. Wall-clock creation time is kept out of
/// this struct (it lives in the manifest) so that equal inputs give equal
/// bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub format_version: u32,
    pub bundle_id: String,
    pub config_hash: String,
    /// Hash of the corpus snapshot, lexicon and stopword contents.
    pub inputs_hash: String,
    pub config: PipelineConfig,
    pub corpus: CorpusStats,
    pub topterms: TopTermsSection,
    pub sentiment: SentimentSection,
    pub coocnet: CoocSection,
    pub topics: TopicsSection,
    pub topicnet: TopicNetSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Topterms,
    Sentiment,
    Coocnet,
    Topics,
    Topicnet,
}

impl std::str::FromStr for Section {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topterms" => Ok(Section::Topterms),
            "sentiment" => Ok(Section::Sentiment),
            "coocnet" => Ok(Section::Coocnet),
            "topics" => Ok(Section::Topics),
            "topicnet" => Ok(Section::Topicnet),
            other => Err(format!("unknown section `{other}`")),
        }
    }
}

impl AnalysisBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serialization is infallible")
    }

    pub fn section(&self, section: Section) -> serde_json::Value {
        let value = match section {
            Section::Topterms => serde_json::to_value(&self.topterms),
            Section::Sentiment => serde_json::to_value(&self.sentiment),
            Section::Coocnet => serde_json::to_value(&self.coocnet),
            Section::Topics => serde_json::to_value(&self.topics),
            Section::Topicnet => serde_json::to_value(&self.topicnet),
        };
        value.expect("section serialization is infallible")
    }
}

/// Resolved inputs of a job, independent of the store.
pub struct PipelineInputs {
    pub view: CorpusView,
    pub preprocess: PreprocessConfig,
    pub lexicon: Lexicon,
    pub inputs_hash: String,
}

impl PipelineInputs {
    pub fn resolve(store: &CorpusStore, config: &PipelineConfig) -> Result<Self, PipelineError> {
        let view = store
            .filter_corpus(&config.corpus_id, &config.filter)
            .map_err(|e| PipelineError {
                stage: Stage::Corpus,
                message: e.to_string(),
                retryable: e.is_retryable(),
            })?;
        Self::from_view(view, config)
    }

    pub fn from_view(view: CorpusView, config: &PipelineConfig) -> Result<Self, PipelineError> {
        let preprocess = config
            .preprocess
            .resolve()
            .map_err(PipelineError::at(Stage::Preprocess))?;
        let lexicon = match &config.lexicon {
            Some(path) => sentiment::load_lexicon(path, &config.preprocess.language),
            None => Lexicon::bundled(&config.preprocess.language),
        }
        .map_err(PipelineError::at(Stage::Sentiment))?;

        let mut hasher = Sha256::new();
        hasher.update(view.content_hash().as_bytes());
        hasher.update(
            serde_json::to_string(&preprocess.stopwords)
                .expect("infallible")
                .as_bytes(),
        );
        hasher.update(serde_json::to_string(&lexicon.entries).expect("infallible").as_bytes());
        Ok(Self {
            view,
            preprocess,
            lexicon,
            inputs_hash: hex::encode(hasher.finalize()),
        })
    }

    pub fn bundle_id(&self, config: &PipelineConfig) -> String {
        let digest = Sha256::digest(format!("{}:{}", config.hash(), self.inputs_hash).as_bytes());
        hex::encode(digest)[..24].to_string()
    }
}

/// Intermediate products kept next to the bundle.
pub struct Artifacts {
    pub bundle: AnalysisBundle,
    pub dtm: DocumentTermMatrix,
    pub model: LdaModel,
}

/// Run every stage in memory. `progress` is told when each stage starts.
pub fn analyze(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
    mut progress: impl FnMut(Stage),
) -> Result<Artifacts, PipelineError> {
    if config.top_n == 0 || config.top_terms == 0 {
        return Err(PipelineError::at(Stage::Dtm)("top_n and top_terms must be at least 1"));
    }

    progress(Stage::Preprocess);
    let docs = preprocess::preprocess_corpus(&inputs.view, &inputs.preprocess)
        .map_err(PipelineError::at(Stage::Preprocess))?;

    progress(Stage::Dtm);
    let full = dtm::build_dtm(&docs).map_err(PipelineError::at(Stage::Dtm))?;
    let matrix = dtm::trim_sparse(&full, config.max_sparsity).map_err(PipelineError::at(Stage::Dtm))?;
    let topterms = TopTermsSection {
        documents: matrix.n_docs(),
        empty_documents: matrix.empty_rows().len(),
        vocabulary_size: matrix.n_terms(),
        terms: dtm::top_terms(&matrix, config.top_terms),
    };

    progress(Stage::Sentiment);
    let series = sentiment::sentiment_series(&docs, &inputs.lexicon, Bucket::Day);
    let peaks = sentiment::find_peaks(&series, config.peaks.window, config.peaks.min_prominence);
    let sentiment = SentimentSection {
        lexicon_size: inputs.lexicon.len(),
        series,
        peaks,
    };

    progress(Stage::Coocnet);
    let graph = coocnet::cooccurrence(&matrix, config.cooc_mode)
        .prune(config.cooc_min_weight)
        .without_isolated();
    let centrality = if graph.node_count() >= 2 {
        coocnet::centrality_table(&graph).map_err(PipelineError::at(Stage::Coocnet))?
    } else {
        CentralityTable::default()
    };
    let coocnet = CoocSection {
        mode: config.cooc_mode,
        min_weight: config.cooc_min_weight,
        edges: graph
            .edges
            .iter()
            .map(|(&(u, v), &w)| CoocEdge {
                source: graph.nodes[u].clone(),
                target: graph.nodes[v].clone(),
                weight: w,
            })
            .collect(),
        nodes: graph.nodes,
        centrality,
    };

    progress(Stage::Topicmodel);
    let model = topicmodel::fit_lda(&matrix, &config.lda).map_err(PipelineError::at(Stage::Topicmodel))?;
    let log_likelihood = topicmodel::log_likelihood(&model, &matrix).map_err(PipelineError::at(Stage::Topicmodel))?;
    let term_topics = topicmodel::top_terms_per_topic(&model, config.top_n);

    progress(Stage::Topicnet);
    let bipartite = topicnet::build_bipartite(&term_topics);
    let topicnet = TopicNetSection {
        centrality: topicnet::bipartite_centrality(&bipartite),
        bridges: topicnet::bridge_terms(&bipartite, 2),
        graph: bipartite,
    };

    let bundle = AnalysisBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        bundle_id: inputs.bundle_id(config),
        config_hash: config.hash(),
        inputs_hash: inputs.inputs_hash.clone(),
        config: config.clone(),
        corpus: inputs.view.stats(),
        topterms,
        sentiment,
        coocnet,
        topics: TopicsSection {
            k: model.k(),
            log_likelihood,
            term_topics,
        },
        topicnet,
    };
    Ok(Artifacts {
        bundle,
        dtm: matrix,
        model,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub bundle_id: String,
    pub format_version: u32,
    pub created_at: chrono::DateTime<chrono::Utc>,
    /// File name → SHA-256.
    pub files: BTreeMap<String, String>,
}

/// Content-addressed directory of finished bundles.
#[derive(Debug, Clone)]
pub struct BundleStore {
    root: PathBuf,
}

impl BundleStore {
    pub fn open(data_dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let root = data_dir.as_ref().join("bundles");
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn dir(&self, bundle_id: &str) -> PathBuf {
        self.root.join(bundle_id)
    }

    fn valid_id(bundle_id: &str) -> bool {
        !bundle_id.is_empty() && bundle_id.chars().all(|c| c.is_ascii_hexdigit())
    }

    pub fn contains(&self, bundle_id: &str) -> bool {
        Self::valid_id(bundle_id) && self.dir(bundle_id).join("bundle.json").is_file()
    }

    /// Raw bytes of `bundle.json`.
    pub fn bytes(&self, bundle_id: &str) -> std::io::Result<Vec<u8>> {
        if !Self::valid_id(bundle_id) {
            return Err(std::io::Error::new(std::io::ErrorKind::NotFound, "invalid bundle id"));
        }
        fs::read(self.dir(bundle_id).join("bundle.json"))
    }

    pub fn load(&self, bundle_id: &str) -> Result<AnalysisBundle, PipelineError> {
        let bytes = self.bytes(bundle_id).map_err(PipelineError::at(Stage::Persist))?;
        serde_json::from_slice(&bytes).map_err(PipelineError::at(Stage::Persist))
    }

    pub fn manifest(&self, bundle_id: &str) -> Result<BundleManifest, PipelineError> {
        let text =
            fs::read_to_string(self.dir(bundle_id).join("manifest.json")).map_err(PipelineError::at(Stage::Persist))?;
        serde_json::from_str(&text).map_err(PipelineError::at(Stage::Persist))
    }

    pub fn list(&self) -> std::io::Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .filter(|name| self.contains(name))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Write every file into a scratch directory, then rename it into place.
    /// An existing bundle with the same id is left untouched.
    pub fn persist(&self, artifacts: &Artifacts) -> Result<(), PipelineError> {
        let id = &artifacts.bundle.bundle_id;
        if self.contains(id) {
            return Ok(());
        }
        let scratch = self.root.join(format!(".tmp-{id}-{}", std::process::id()));
        let result = write_bundle_files(&scratch, artifacts).and_then(|_| {
            match fs::rename(&scratch, self.dir(id)) {
                Ok(()) => Ok(()),
                // lost a race against an identical job
                Err(_) if self.contains(id) => Ok(()),
                Err(e) => Err(e.to_string()),
            }
        });
        if scratch.exists() {
            let _ = fs::remove_dir_all(&scratch);
        }
        result.map_err(PipelineError::at(Stage::Persist))
    }
}

fn write_bundle_files(dir: &Path, artifacts: &Artifacts) -> Result<(), String> {
    let b = &artifacts.bundle;
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let err = |e: &dyn fmt::Display| e.to_string();

    files.insert("bundle.json".into(), b.to_json().into_bytes());
    files.insert(
        "config.json".into(),
        serde_json::to_vec_pretty(&b.config).map_err(|e| err(&e))?,
    );

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["term", "total_count", "doc_count"])
            .map_err(|e| err(&e))?;
        for t in &b.topterms.terms {
            w.write_record([t.term.clone(), t.total_count.to_string(), t.doc_count.to_string()])
                .map_err(|e| err(&e))?;
        }
        w.flush().map_err(|e| err(&e))?;
    }
    files.insert("topterms.csv".into(), buf);

    let mut buf = Vec::new();
    b.sentiment.series.write_csv(&mut buf).map_err(|e| err(&e))?;
    files.insert("sentiment.csv".into(), buf);

    let cooc = coocnet::CoocGraph {
        nodes: b.coocnet.nodes.clone(),
        edges: b
            .coocnet
            .edges
            .iter()
            .map(|e| {
                let u = b.coocnet.nodes.binary_search(&e.source).unwrap_or_default();
                let v = b.coocnet.nodes.binary_search(&e.target).unwrap_or_default();
                ((u.min(v), u.max(v)), e.weight)
            })
            .collect(),
        mode: b.coocnet.mode,
    }
    .to_export(Some(&b.coocnet.centrality));
    let topic_net = b.topicnet.graph.to_export(Some(&b.topicnet.centrality));
    for (prefix, net) in [("coocnet", &cooc), ("topicnet", &topic_net)] {
        for (suffix, format) in [
            ("_edges.csv", GraphFormat::EdgesCsv),
            ("_centrality.csv", GraphFormat::CentralityCsv),
            (".graphml", GraphFormat::GraphMl),
        ] {
            let mut buf = Vec::new();
            net.write(format, &mut buf).map_err(|e| err(&e))?;
            files.insert(format!("{prefix}{suffix}"), buf);
        }
    }

    let mut buf = Vec::new();
    b.topics.term_topics.write_csv(&mut buf).map_err(|e| err(&e))?;
    files.insert("topics.csv".into(), buf);
    let mut buf = Vec::new();
    b.topics.term_topics.write_table_csv(&mut buf).map_err(|e| err(&e))?;
    files.insert("topics_table.csv".into(), buf);
    files.insert(
        "model.json".into(),
        artifacts.model.to_json(false).map_err(|e| err(&e))?.into_bytes(),
    );

    let (mut t, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new());
    artifacts.dtm.write_triplets(&mut t).map_err(|e| err(&e))?;
    artifacts.dtm.write_vocabulary(&mut v).map_err(|e| err(&e))?;
    artifacts.dtm.write_doc_ids(&mut d).map_err(|e| err(&e))?;
    files.insert("dtm.tsv".into(), t);
    files.insert("vocabulary.txt".into(), v);
    files.insert("documents.txt".into(), d);

    let manifest = BundleManifest {
        bundle_id: b.bundle_id.clone(),
        format_version: BUNDLE_FORMAT_VERSION,
        created_at: chrono::Utc::now(),
        files: files
            .iter()
            .map(|(name, bytes)| (name.clone(), hex::encode(Sha256::digest(bytes))))
            .collect(),
    };
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes).map_err(|e| err(&e))?;
    }
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest).map_err(|e| err(&e))?,
    )
    .map_err(|e| err(&e))?;
    Ok(())
}

/// Resolve inputs, reuse a cached bundle when one exists, otherwise run
/// and persist. Nothing is written unless every stage succeeds.
pub fn run_pipeline(
    corpora: &CorpusStore,
    bundles: &BundleStore,
    config: &PipelineConfig,
    mut progress: impl FnMut(Stage),
) -> Result<AnalysisBundle, PipelineError> {
    progress(Stage::Corpus);
    let inputs = PipelineInputs::resolve(corpora, config)?;
    let id = inputs.bundle_id(config);
    if bundles.contains(&id) {
        log::info!("bundle {id} served from cache");
        return bundles.load(&id);
    }
    let artifacts = analyze(&inputs, config, &mut progress)?;
    progress(Stage::Persist);
    bundles.persist(&artifacts)?;
    log::info!("bundle {id} written");
    Ok(artifacts.bundle)
}
