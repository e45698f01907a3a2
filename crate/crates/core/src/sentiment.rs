//! Dictionary polarity scoring and its daily time series.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenizedDoc;

const LEXICON_EN: &str = include_str!("../data/lexicon_en.tsv");
const LEXICON_IT: &str = include_str!("../data/lexicon_it.tsv");

pub const MIN_POLARITY: i32 = -5;
pub const MAX_POLARITY: i32 = 5;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("lexicon has no usable entries")]
    EmptyLexicon,
    #[error("malformed lexicon line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no bundled lexicon for language `{0}`")]
    UnknownLanguage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub language: String,
    pub entries: BTreeMap<String, i32>,
}

impl Lexicon {
    /// Parse `term<TAB>integer` lines. Blank lines and `#` comments are
    /// skipped; out-of-range polarities are dropped and duplicates resolved
    /// last-wins, each with a warning.
    pub fn parse(text: &str, language: &str) -> Result<(Self, Vec<String>), SentimentError> {
        let mut entries = BTreeMap::new();
        let mut warnings = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| SentimentError::Malformed {
                line: i + 1,
                message: message.to_string(),
            };
            let (term, value) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected term<TAB>polarity"))?;
            let term = term.trim().to_lowercase();
            if term.is_empty() {
                return Err(malformed("empty term"));
            }
            let polarity: i32 = value
                .trim()
                .parse()
                .map_err(|_| malformed("polarity is not an integer"))?;
            if !(MIN_POLARITY..=MAX_POLARITY).contains(&polarity) {
                warnings.push(format!(
                    "line {}: polarity {polarity} for `{term}` outside [{MIN_POLARITY}, {MAX_POLARITY}], skipped",
                    i + 1
                ));
                continue;
            }
            if let Some(prev) = entries.insert(term.clone(), polarity) {
                warnings.push(format!(
                    "line {}: duplicate `{term}` ({prev} replaced by {polarity})",
                    i + 1
                ));
            }
        }
        if entries.is_empty() {
            return Err(SentimentError::EmptyLexicon);
        }
        Ok((
            Self {
                language: language.to_string(),
                entries,
            },
            warnings,
        ))
    }

    pub fn bundled(language: &str) -> Result<Self, SentimentError> {
        let text = match language {
            "en" => LEXICON_EN,
            "it" => LEXICON_IT,
            other => return Err(SentimentError::UnknownLanguage(other.to_string())),
        };
        Ok(Self::parse(text, language)?.0)
    }

    pub fn polarity(&self, term: &str) -> Option<i32> {
        self.entries.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_lexicon(path: &Path, language: &str) -> Result<Lexicon, SentimentError> {
    let (lexicon, warnings) = Lexicon::parse(&fs::read_to_string(path)?, language)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(lexicon)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocScore {
    pub score: i64,
    /// Lexicon hits, counted with multiplicity.
    pub matched: usize,
}

pub fn score_document<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> DocScore {
    tokens
        .iter()
        .filter_map(|t| lexicon.polarity(t.as_ref()))
        .fold(DocScore::default(), |acc, p| DocScore {
            score: acc.score + p as i64,
            matched: acc.matched + 1,
        })
}

/// How a document's hits become its value in the series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocScoring {
    /// Unnormalized sum of polarities.
    #[default]
    Sum,
    /// Sum divided by the document's token count (0 for empty documents).
    PerToken,
    /// Sum divided by the number of lexicon hits (0 without hits).
    PerMatch,
}

impl DocScoring {
    fn value(self, score: DocScore, n_tokens: usize) -> f64 {
        let denom = match self {
            DocScoring::Sum => return score.score as f64,
            DocScoring::PerToken => n_tokens,
            DocScoring::PerMatch => score.matched,
        };
        if denom == 0 {
            0.0
        } else {
            score.score as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    #[default]
    Day,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentPoint {
    pub date: NaiveDate,
    pub mean_polarity: f64,
    pub doc_count: usize,
    pub total_polarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentSeries {
    pub points: Vec<SentimentPoint>,
}

impl SentimentSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with columns `date,mean,docs,total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "mean", "docs", "total"])?;
        for p in &self.points {
            w.write_record([
                p.date.to_string(),
                p.mean_polarity.to_string(),
                p.doc_count.to_string(),
                p.total_polarity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sentiment_series(docs: &[TokenizedDoc], lexicon: &Lexicon, bucket: Bucket) -> SentimentSeries {
    sentiment_series_with(docs, lexicon, bucket, DocScoring::Sum)
}

/// One point per publication day that has documents; the day value is the
/// mean of document values.
pub fn sentiment_series_with(
    docs: &[TokenizedDoc],
    lexicon: &Lexicon,
    bucket: Bucket,
    scoring: DocScoring,
) -> SentimentSeries {
    let values: Vec<f64> = docs
        .par_iter()
        .map(|d| scoring.value(score_document(&d.tokens, lexicon), d.tokens.len()))
        .collect();
    let mut days: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for (doc, value) in docs.iter().zip(values) {
        let key = match bucket {
            Bucket::Day => doc.published_at,
        };
        let slot = days.entry(key).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }
    SentimentSeries {
        points: days
            .into_iter()
            .map(|(date, (total, n))| SentimentPoint {
                date,
                mean_polarity: total / n as f64,
                doc_count: n,
                total_polarity: total,
            })
            .collect(),
    }
}

/// Dates whose |mean polarity| is the strict maximum over the `window`
/// points on each side and exceeds the series-average |mean| by at least
/// `min_prominence`. Only points with a full window on both sides qualify.
pub fn find_peaks(series: &SentimentSeries, window: usize, min_prominence: f64) -> Vec<NaiveDate> {
    let window = window.max(1);
    let magnitudes: Vec<f64> = series.points.iter().map(|p| p.mean_polarity.abs()).collect();
    let n = magnitudes.len();
    if n < 2 * window + 1 {
        return Vec::new();
    }
    let baseline = magnitudes.iter().sum::<f64>() / n as f64;
    (window..n - window)
        .filter(|&i| {
            let m = magnitudes[i];
            (i - window..=i + window).all(|j| j == i || magnitudes[j] < m) && m - baseline >= min_prominence
        })
        .map(|i| series.points[i].date)
        .collect()
}
