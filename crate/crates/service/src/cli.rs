//! `cometa` command line. Each stage is runnable on its own; `run` and
//! `show` mirror the analysis endpoints of the HTTP API.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use cometa_core::coocnet::{self, CoocMode};
use cometa_core::corpus::{CorpusFilter, CorpusStore, DateInterval};
use cometa_core::dtm;
use cometa_core::export::GraphFormat;
use cometa_core::pipeline::{self, BundleStore, PipelineConfig, PreprocessSettings, Section};
use cometa_core::preprocess::{self, TokenizedDoc};
use cometa_core::sentiment::{self, Bucket, Lexicon};
use cometa_core::topicmodel::{self, LdaConfig, LdaModel};
use cometa_core::topicnet;

use crate::app::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "cometa", version, about = "Media-monitoring text analytics")]
pub struct Cli {
    /// Directory holding corpora and analysis bundles.
    #[arg(long, env = "COMETA_DATA_DIR", default_value = "cometa-data", global = true)]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Append JSON-lines articles to a corpus (reads stdin without files).
    Ingest {
        #[arg(long)]
        corpus: String,
        files: Vec<PathBuf>,
    },
    /// List corpora.
    Corpora,
    /// Article counts per language and source, and the date range.
    Stats {
        #[arg(long)]
        corpus: String,
    },
    /// Tokenize a corpus slice; writes one JSON document per line.
    Preprocess {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        text: TextArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the document-term matrix and print the most frequent terms.
    Dtm {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        text: TextArgs,
        #[arg(long, default_value_t = dtm::DEFAULT_MAX_SPARSITY)]
        max_sparsity: f64,
        #[arg(long, default_value_t = 50)]
        top: usize,
        /// Also write dtm.tsv, vocabulary.txt and documents.txt here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Daily mean polarity as CSV (date,mean,docs,total); peaks go to stderr.
    Sentiment {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        text: TextArgs,
        /// Tab-separated `term<TAB>polarity` file; bundled list when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[arg(long, default_value_t = 0.0)]
        min_prominence: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Term co-occurrence network.
    Coocnet {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        text: TextArgs,
        #[arg(long, default_value_t = dtm::DEFAULT_MAX_SPARSITY)]
        max_sparsity: f64,
        #[arg(long, default_value = "binary", value_parser = parse_mode)]
        mode: CoocMode,
        #[arg(long, default_value_t = coocnet::DEFAULT_MIN_WEIGHT)]
        min_weight: u64,
        /// edges-csv, centrality-csv or graphml.
        #[arg(long, default_value = "edges-csv")]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an LDA model and print the top terms per topic.
    Lda {
        #[command(flatten)]
        slice: SliceArgs,
        #[command(flatten)]
        text: TextArgs,
        #[arg(long, default_value_t = dtm::DEFAULT_MAX_SPARSITY)]
        max_sparsity: f64,
        #[command(flatten)]
        lda: LdaArgs,
        #[arg(long, default_value_t = topicmodel::DEFAULT_TOP_N)]
        top: usize,
        /// Save the fitted model (JSON container).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Print a wide table (one column per topic) instead of long rows.
        #[arg(long)]
        table: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topics-terms two-mode network from a saved model.
    Topicnet {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = topicmodel::DEFAULT_TOP_N)]
        top: usize,
        #[arg(long, default_value = "centrality-csv")]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and persist the bundle; prints the bundle id.
    Run {
        /// PipelineConfig JSON file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Show a stored analysis bundle or one of its sections.
    Show {
        bundle_id: String,
        /// topterms, sentiment, coocnet, topics or topicnet.
        #[arg(long)]
        section: Option<Section>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Concurrent analysis jobs; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[arg(long)]
    pub corpus: String,
    /// Keep only these sources (repeatable).
    #[arg(long = "source")]
    pub sources: Vec<String>,
    /// Keep only articles in these languages (repeatable).
    #[arg(long = "only-lang")]
    pub languages: Vec<String>,
    /// First publication date, inclusive (YYYY-MM-DD).
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last publication date, inclusive.
    #[arg(long)]
    pub to: Option<NaiveDate>,
}

impl SliceArgs {
    fn filter(&self) -> CorpusFilter {
        CorpusFilter {
            sources: self.sources.iter().cloned().collect(),
            languages: self.languages.iter().cloned().collect(),
            dates: DateInterval {
                start: self.from,
                end: self.to,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct TextArgs {
    #[arg(long, default_value = "en")]
    pub lang: String,
    /// Stopword file replacing the bundled list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Additional stopwords (repeatable).
    #[arg(long = "stopword")]
    pub extra_stopwords: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub min_len: usize,
    #[arg(long)]
    pub keep_digits: bool,
    #[arg(long)]
    pub stemming: bool,
}

impl TextArgs {
    fn settings(&self) -> PreprocessSettings {
        PreprocessSettings {
            language: self.lang.clone(),
            min_token_len: self.min_len,
            stopwords_file: self.stopwords.clone(),
            extra_stopwords: self.extra_stopwords.iter().cloned().collect(),
            strip_digits: !self.keep_digits,
            stemming: self.stemming,
            ..PreprocessSettings::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct LdaArgs {
    #[arg(short = 'k', long = "topics", default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long = "iters", default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Document-topic prior; 50/K when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
}

impl LdaArgs {
    fn config(&self) -> LdaConfig {
        let base = LdaConfig::new(self.k);
        let alpha = self.alpha.unwrap_or(base.alpha);
        base.with_seed(self.seed)
            .with_iterations(self.iterations, self.burn_in)
            .with_priors(alpha, self.beta)
    }
}

fn parse_mode(s: &str) -> Result<CoocMode, String> {
    match s {
        "binary" => Ok(CoocMode::Binary),
        "count" => Ok(CoocMode::Count),
        other => Err(format!("unknown mode `{other}` (binary or count)")),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn tokenized(store: &CorpusStore, slice: &SliceArgs, text: &TextArgs) -> Result<Vec<TokenizedDoc>> {
    let view = store.filter_corpus(&slice.corpus, &slice.filter())?;
    let config = text.settings().resolve()?;
    Ok(preprocess::preprocess_corpus(&view, &config)?)
}

fn matrix(
    store: &CorpusStore,
    slice: &SliceArgs,
    text: &TextArgs,
    max_sparsity: f64,
) -> Result<dtm::DocumentTermMatrix> {
    let docs = tokenized(store, slice, text)?;
    Ok(dtm::trim_sparse(&dtm::build_dtm(&docs)?, max_sparsity)?)
}

pub fn run(cli: Cli) -> Result<()> {
    let data_dir = cli.data_dir;
    let store = || CorpusStore::open(&data_dir).with_context(|| format!("opening data dir {}", data_dir.display()));
    match cli.command {
        Command::Ingest { corpus, files } => {
            let store = store()?;
            let report = if files.is_empty() {
                store.ingest_reader(&corpus, io::stdin().lock())?
            } else {
                let mut total = cometa_core::corpus::IngestReport::default();
                for path in &files {
                    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    let r = store.ingest_reader(&corpus, BufReader::new(file))?;
                    total.accepted += r.accepted;
                    total.rejected += r.rejected;
                    total.rejections.extend(r.rejections);
                }
                total
            };
            print_json(&report)
        }
        Command::Corpora => print_json(&serde_json::json!({ "corpora": store()?.list_corpora()? })),
        Command::Stats { corpus } => print_json(&store()?.corpus_stats(&corpus)?),
        Command::Preprocess { slice, text, out } => {
            let docs = tokenized(&store()?, &slice, &text)?;
            let mut w = output(&out)?;
            for d in &docs {
                serde_json::to_writer(&mut w, d)?;
                writeln!(w)?;
            }
            Ok(w.flush()?)
        }
        Command::Dtm {
            slice,
            text,
            max_sparsity,
            top,
            out_dir,
        } => {
            let m = matrix(&store()?, &slice, &text, max_sparsity)?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                m.write_triplets(BufWriter::new(File::create(dir.join("dtm.tsv"))?))?;
                m.write_vocabulary(BufWriter::new(File::create(dir.join("vocabulary.txt"))?))?;
                m.write_doc_ids(BufWriter::new(File::create(dir.join("documents.txt"))?))?;
            }
            eprintln!("{} documents, {} terms", m.n_docs(), m.n_terms());
            let mut w = output(&None)?;
            writeln!(w, "term,total_count,doc_count")?;
            for t in dtm::top_terms(&m, top) {
                writeln!(w, "{},{},{}", t.term, t.total_count, t.doc_count)?;
            }
            Ok(w.flush()?)
        }
        Command::Sentiment {
            slice,
            text,
            lexicon,
            window,
            min_prominence,
            out,
        } => {
            let docs = tokenized(&store()?, &slice, &text)?;
            let lex = match &lexicon {
                Some(p) => sentiment::load_lexicon(p, &text.lang)?,
                None => Lexicon::bundled(&text.lang)?,
            };
            let series = sentiment::sentiment_series(&docs, &lex, Bucket::Day);
            let mut w = output(&out)?;
            series.write_csv(&mut w)?;
            w.flush()?;
            for date in sentiment::find_peaks(&series, window, min_prominence) {
                eprintln!("peak {date}");
            }
            Ok(())
        }
        Command::Coocnet {
            slice,
            text,
            max_sparsity,
            mode,
            min_weight,
            format,
            out,
        } => {
            let m = matrix(&store()?, &slice, &text, max_sparsity)?;
            let graph = coocnet::cooccurrence(&m, mode).prune(min_weight).without_isolated();
            let table = coocnet::centrality_table(&graph)?;
            let mut w = output(&out)?;
            coocnet::export_graph(&graph, Some(&table), format, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Lda {
            slice,
            text,
            max_sparsity,
            lda,
            top,
            model,
            table,
            out,
        } => {
            let m = matrix(&store()?, &slice, &text, max_sparsity)?;
            let fitted = topicmodel::fit_lda(&m, &lda.config())?;
            if let Some(path) = model {
                fitted.save(&path, false)?;
            }
            eprintln!("log-likelihood {:.3}", topicmodel::log_likelihood(&fitted, &m)?);
            let terms = topicmodel::top_terms_per_topic(&fitted, top);
            let mut w = output(&out)?;
            if table {
                terms.write_table_csv(&mut w)?;
            } else {
                terms.write_csv(&mut w)?;
            }
            Ok(w.flush()?)
        }
        Command::Topicnet {
            model,
            top,
            format,
            out,
        } => {
            let fitted = LdaModel::load(&model)?;
            let graph = topicnet::build_bipartite(&topicmodel::top_terms_per_topic(&fitted, top));
            let centrality = topicnet::bipartite_centrality(&graph);
            let mut w = output(&out)?;
            topicnet::export_graph(&graph, Some(&centrality), format, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let config: PipelineConfig = serde_json::from_str(&text).context("parsing pipeline config")?;
            let corpora = store()?;
            let bundles = BundleStore::open(&data_dir)?;
            let bundle = pipeline::run_pipeline(&corpora, &bundles, &config, |stage| eprintln!("stage {stage}"))?;
            println!("{}", bundle.bundle_id);
            eprintln!("written to {}", bundles.dir(&bundle.bundle_id).display());
            Ok(())
        }
        Command::Show { bundle_id, section } => {
            let bundles = BundleStore::open(&data_dir)?;
            if !bundles.contains(&bundle_id) {
                bail!("unknown analysis `{bundle_id}`");
            }
            let bundle = bundles.load(&bundle_id)?;
            match section {
                Some(s) => print_json(&bundle.section(s)),
                None => print_json(&bundle),
            }
        }
        Command::Serve { bind, workers } => {
            let state = AppState::open(&data_dir, workers.unwrap_or_else(app::default_workers))?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, &bind))
        }
    }
}

pub async fn serve(state: AppState, bind: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .with_context(|| format!("binding {bind}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
