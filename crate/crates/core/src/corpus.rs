//! Article corpora on disk.
//!
//! Layout under the store root:
//! ```text
//! {root}/corpora/{corpus-id}/
//! ├── articles.jsonl   # append-only, one normalized record per line
//! └── .lock            # advisory writer lock
//! ```
//!
//! The id index is rebuilt in memory on every open. A trailing line without
//! a newline terminator is an interrupted append and is ignored on read.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Days, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const ARTICLES_FILE: &str = "articles.jsonl";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corpus `{0}` not found")]
    NotFound(String),
    #[error("corpus `{0}` is locked by another writer, retry later")]
    Locked(String),
    #[error("invalid corpus id `{0}` (allowed: ASCII letters, digits, `-`, `_`)")]
    InvalidId(String),
    #[error("corpus `{corpus}` is corrupt at line {line}: {message}")]
    Corrupt {
        corpus: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StoreError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, StoreError::Locked(_))
    }
}

/// One news document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source: String,
    pub language: String,
    pub published_at: NaiveDate,
    pub title: String,
    pub body: String,
}

impl Article {
    /// Headline and body joined the way the tokenizer consumes them.
    pub fn text(&self) -> String {
        match (self.title.is_empty(), self.body.is_empty()) {
            (false, false) => format!("{}\n{}", self.title, self.body),
            (false, true) => self.title.clone(),
            _ => self.body.clone(),
        }
    }

    /// The normalized JSON-lines record (no trailing newline).
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("article serialization is infallible")
    }

    fn sort_key(&self) -> (NaiveDate, &str) {
        (self.published_at, &self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed(String),
    MissingField(String),
    BadDate,
    DateOutOfRange,
    UnsupportedLanguage(String),
    EmptyText,
    DuplicateId,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed(m) => write!(f, "malformed record: {m}"),
            RejectReason::MissingField(name) => write!(f, "missing field `{name}`"),
            RejectReason::BadDate => f.write_str("bad date"),
            RejectReason::DateOutOfRange => f.write_str("date out of range"),
            RejectReason::UnsupportedLanguage(l) => write!(f, "unsupported language `{l}`"),
            RejectReason::EmptyText => f.write_str("empty title and body"),
            RejectReason::DuplicateId => f.write_str("duplicate id"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based position of the record in the submitted batch.
    pub record: usize,
    pub id: Option<String>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

/// Inclusive date interval; a missing bound is unconstrained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateInterval {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateInterval {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            start: Some(start),
            end: Some(end),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start.is_none_or(|s| date >= s) && self.end.is_none_or(|e| date <= e)
    }
}

/// Filter facets. An empty facet places no constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusFilter {
    pub sources: BTreeSet<String>,
    pub languages: BTreeSet<String>,
    pub dates: DateInterval,
}

impl CorpusFilter {
    pub fn matches(&self, article: &Article) -> bool {
        (self.sources.is_empty() || self.sources.contains(&article.source))
            && (self.languages.is_empty() || self.languages.contains(&article.language))
            && self.dates.contains(article.published_at)
    }
}

/// Immutable snapshot of the articles matching a filter, ordered by
/// `(published_at, id)`.
#[derive(Debug, Clone)]
pub struct CorpusView {
    pub corpus_id: String,
    pub filter: CorpusFilter,
    articles: Arc<[Article]>,
}

impl CorpusView {
    pub fn from_articles(corpus_id: impl Into<String>, mut articles: Vec<Article>) -> Self {
        articles.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Self {
            corpus_id: corpus_id.into(),
            filter: CorpusFilter::default(),
            articles: articles.into(),
        }
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn article_ids(&self) -> Vec<String> {
        self.articles.iter().map(|a| a.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Narrow this view further. The recorded filter is replaced by `filter`.
    pub fn filter(&self, filter: &CorpusFilter) -> CorpusView {
        let articles: Vec<Article> = self.articles.iter().filter(|a| filter.matches(a)).cloned().collect();
        CorpusView {
            corpus_id: self.corpus_id.clone(),
            filter: filter.clone(),
            articles: articles.into(),
        }
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats::from_articles(&self.articles)
    }

    /// Normalized JSON-lines export.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for a in self.articles.iter() {
            out.push_str(&a.to_record());
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the normalized export; identifies the snapshot content.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.export().as_bytes()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub by_language: BTreeMap<String, usize>,
    pub by_source: BTreeMap<String, usize>,
    pub date_range: Option<(NaiveDate, NaiveDate)>,
}

impl CorpusStats {
    pub fn from_articles(articles: &[Article]) -> Self {
        let mut stats = CorpusStats::default();
        for a in articles {
            stats.total += 1;
            *stats.by_language.entry(a.language.clone()).or_default() += 1;
            *stats.by_source.entry(a.source.clone()).or_default() += 1;
            stats.date_range = Some(match stats.date_range {
                None => (a.published_at, a.published_at),
                Some((lo, hi)) => (lo.min(a.published_at), hi.max(a.published_at)),
            });
        }
        stats
    }
}

/// File-backed collection of corpora.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    root: PathBuf,
    languages: BTreeSet<String>,
}

impl CorpusStore {
    /// Open (creating if needed) a store accepting English and Italian.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::with_languages(root, ["en", "it"])
    }

    pub fn with_languages<I, S>(root: impl AsRef<Path>, languages: I) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("corpora"))?;
        Ok(Self {
            root,
            languages: languages.into_iter().map(Into::into).collect(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn languages(&self) -> &BTreeSet<String> {
        &self.languages
    }

    fn corpus_dir(&self, corpus_id: &str) -> Result<PathBuf, StoreError> {
        let valid = !corpus_id.is_empty()
            && corpus_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !valid {
            return Err(StoreError::InvalidId(corpus_id.to_string()));
        }
        Ok(self.root.join("corpora").join(corpus_id))
    }

    pub fn exists(&self, corpus_id: &str) -> bool {
        self.corpus_dir(corpus_id)
            .map(|d| d.join(ARTICLES_FILE).is_file())
            .unwrap_or(false)
    }

    pub fn list_corpora(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("corpora"))? {
            let entry = entry?;
            if entry.path().join(ARTICLES_FILE).is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn create_corpus(&self, corpus_id: &str) -> Result<(), StoreError> {
        let dir = self.corpus_dir(corpus_id)?;
        fs::create_dir_all(&dir)?;
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(ARTICLES_FILE))?;
        Ok(())
    }

    /// Validate and append a batch of JSON-lines records. Blank lines are
    /// skipped. The corpus is created on first ingest.
    pub fn ingest_documents<I, S>(&self, corpus_id: &str, records: I) -> Result<IngestReport, StoreError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.create_corpus(corpus_id)?;
        let dir = self.corpus_dir(corpus_id)?;
        let _lock = WriterLock::acquire(&dir, corpus_id)?;

        let existing = read_articles(&dir.join(ARTICLES_FILE), corpus_id)?;
        let mut seen: HashSet<String> = existing.into_iter().map(|a| a.id).collect();
        let today = Utc::now().date_naive();
        let mut report = IngestReport::default();
        let mut buffer = String::new();

        for (i, line) in records
            .into_iter()
            .filter(|l| !l.as_ref().trim().is_empty())
            .enumerate()
        {
            match parse_record(line.as_ref(), &self.languages, today) {
                Ok(article) => {
                    if seen.contains(&article.id) {
                        report.rejections.push(Rejection {
                            record: i + 1,
                            id: Some(article.id),
                            reason: RejectReason::DuplicateId,
                        });
                        continue;
                    }
                    seen.insert(article.id.clone());
                    buffer.push_str(&article.to_record());
                    buffer.push('\n');
                    report.accepted += 1;
                }
                Err((id, reason)) => report.rejections.push(Rejection {
                    record: i + 1,
                    id,
                    reason,
                }),
            }
        }
        report.rejected = report.rejections.len();

        if !buffer.is_empty() {
            append_atomically(&dir.join(ARTICLES_FILE), buffer.as_bytes())?;
        }
        log::info!(
            "ingest into `{corpus_id}`: {} accepted, {} rejected",
            report.accepted,
            report.rejected
        );
        Ok(report)
    }

    pub fn ingest_reader<R: BufRead>(&self, corpus_id: &str, reader: R) -> Result<IngestReport, StoreError> {
        let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
        self.ingest_documents(corpus_id, lines)
    }

    /// Snapshot of the whole corpus.
    pub fn view(&self, corpus_id: &str) -> Result<CorpusView, StoreError> {
        let dir = self.corpus_dir(corpus_id)?;
        let path = dir.join(ARTICLES_FILE);
        if !path.is_file() {
            return Err(StoreError::NotFound(corpus_id.to_string()));
        }
        let articles = read_articles(&path, corpus_id)?;
        Ok(CorpusView::from_articles(corpus_id, articles))
    }

    pub fn filter_corpus(&self, corpus_id: &str, filter: &CorpusFilter) -> Result<CorpusView, StoreError> {
        Ok(self.view(corpus_id)?.filter(filter))
    }

    pub fn corpus_stats(&self, corpus_id: &str) -> Result<CorpusStats, StoreError> {
        Ok(self.view(corpus_id)?.stats())
    }

    pub fn export(&self, corpus_id: &str) -> Result<String, StoreError> {
        Ok(self.view(corpus_id)?.export())
    }
}

struct WriterLock {
    file: File,
}

impl WriterLock {
    fn acquire(dir: &Path, corpus_id: &str) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        match file.try_lock() {
            Ok(()) => Ok(Self { file }),
            Err(TryLockError::WouldBlock) => Err(StoreError::Locked(corpus_id.to_string())),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

fn append_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut file = OpenOptions::new().append(true).open(path)?;
    let original_len = file.metadata()?.len();
    let result = file.write_all(bytes).and_then(|_| file.sync_data());
    if result.is_err() {
        // roll back a partial append
        let _ = file.set_len(original_len);
    }
    result
}

fn read_articles(path: &Path, corpus_id: &str) -> Result<Vec<Article>, StoreError> {
    let mut content = String::new();
    File::open(path)?.read_to_string(&mut content)?;
    let complete = match content.rfind('\n') {
        Some(pos) => &content[..=pos],
        None => "",
    };
    let mut articles = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let article: Article = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            corpus: corpus_id.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        articles.push(article);
    }
    Ok(articles)
}

type RecordError = (Option<String>, RejectReason);

fn parse_record(line: &str, languages: &BTreeSet<String>, today: NaiveDate) -> Result<Article, RecordError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| (None, RejectReason::Malformed(e.to_string())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| (None, RejectReason::Malformed("not a JSON object".into())))?;

    let id = match obj.get("id") {
        Some(serde_json::Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err((None, RejectReason::MissingField("id".into()))),
    };
    let field = |name: &str| -> Result<String, RecordError> {
        match obj.get(name) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(serde_json::Value::Null) | None if name == "title" || name == "body" => Ok(String::new()),
            _ => Err((Some(id.clone()), RejectReason::MissingField(name.into()))),
        }
    };

    let source = field("source")?.trim().to_string();
    if source.is_empty() {
        return Err((Some(id), RejectReason::MissingField("source".into())));
    }
    let language = field("language")?.trim().to_lowercase();
    if !languages.contains(&language) {
        return Err((Some(id), RejectReason::UnsupportedLanguage(language)));
    }
    let raw_date = field("published_at")?;
    let published_at = parse_date(&raw_date).ok_or_else(|| (Some(id.clone()), RejectReason::BadDate))?;
    let earliest = NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date");
    let latest = today.checked_add_days(Days::new(1)).unwrap_or(today);
    if published_at < earliest || published_at > latest {
        return Err((Some(id), RejectReason::DateOutOfRange));
    }
    let title = field("title")?.trim().to_string();
    let body = field("body")?.trim().to_string();
    if title.is_empty() && body.is_empty() {
        return Err((Some(id), RejectReason::EmptyText));
    }

    Ok(Article {
        id,
        source,
        language,
        published_at,
        title,
        body,
    })
}

/// Accepts a calendar date or an RFC 3339 timestamp (reduced to its UTC day).
fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok().or_else(|| {
        chrono::DateTime::parse_from_rfc3339(raw)
            .ok()
            .map(|dt| dt.with_timezone(&Utc).date_naive())
    })
}
