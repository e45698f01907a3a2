//! Tokenization and normalization of article text.
//!
//! Rules, applied per whitespace-separated chunk:
//! 1. non-alphanumeric characters are stripped from both edges (interior
//!    hyphens and apostrophes survive, so `covid-19` stays one token);
//! 2. the chunk is lowercased;
//! 3. it is dropped if shorter than `min_token_len` characters, if it is a
//!    stopword, or if it contains digits but no letters.
//!
//! Stemming is available but off by default.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusView;

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const STOPWORDS_IT: &str = include_str!("../data/stopwords_it.txt");

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("no bundled stopword list for language `{0}`; supply a stopword file")]
    UnknownLanguage(String),
    #[error("stopword list {0} is empty")]
    EmptyStopwords(String),
    #[error("min_token_len must be at least 1")]
    InvalidMinLength,
    #[error("article `{id}` has language `{found}`, expected `{expected}`")]
    LanguageMismatch {
        id: String,
        found: String,
        expected: String,
    },
    #[error("stemming is not available for language `{0}`")]
    NoStemmer(String),
    #[error("cannot read stopword file: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse the stopword file format: one term per line, `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Bundled list for `en`/`it`, or the given file for any language.
pub fn load_stopwords(language: &str, file: Option<&Path>) -> Result<BTreeSet<String>, PreprocessError> {
    let (set, origin) = match file {
        Some(path) => (parse_stopwords(&fs::read_to_string(path)?), path.display().to_string()),
        None => {
            let text = match language {
                "en" => STOPWORDS_EN,
                "it" => STOPWORDS_IT,
                other => return Err(PreprocessError::UnknownLanguage(other.to_string())),
            };
            (parse_stopwords(text), format!("for `{language}`"))
        }
    };
    if set.is_empty() {
        return Err(PreprocessError::EmptyStopwords(origin));
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub language: String,
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub strip_digits: bool,
    pub min_token_len: usize,
    pub stopwords: BTreeSet<String>,
    pub extra_stopwords: BTreeSet<String>,
    /// Snowball stemming; off by default.
    #[serde(default)]
    pub stemming: bool,
}

impl PreprocessConfig {
    /// Defaults with the bundled stopword list of `language`.
    pub fn for_language(language: &str) -> Result<Self, PreprocessError> {
        Ok(Self::with_stopwords(language, load_stopwords(language, None)?))
    }

    pub fn with_stopwords(language: &str, stopwords: BTreeSet<String>) -> Self {
        Self {
            language: language.to_string(),
            lowercase: true,
            strip_punctuation: true,
            strip_digits: true,
            min_token_len: 2,
            stopwords,
            extra_stopwords: BTreeSet::new(),
            stemming: false,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.min_token_len < 1 {
            return Err(PreprocessError::InvalidMinLength);
        }
        if self.stemming {
            stemmer_for(&self.language)?;
        }
        Ok(())
    }

    fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term) || self.extra_stopwords.contains(term)
    }
}

fn stemmer_for(language: &str) -> Result<Stemmer, PreprocessError> {
    let algorithm = match language {
        "en" => Algorithm::English,
        "it" => Algorithm::Italian,
        "fr" => Algorithm::French,
        "es" => Algorithm::Spanish,
        "de" => Algorithm::German,
        "pt" => Algorithm::Portuguese,
        other => return Err(PreprocessError::NoStemmer(other.to_string())),
    };
    Ok(Stemmer::create(algorithm))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub article_id: String,
    pub tokens: Vec<String>,
    pub published_at: NaiveDate,
    pub language: String,
}

/// Normalized terms of `text` in original order.
pub fn tokenize(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let stemmer = if config.stemming {
        stemmer_for(&config.language).ok()
    } else {
        None
    };
    tokenize_with(text, config, stemmer.as_ref())
}

fn tokenize_with(text: &str, config: &PreprocessConfig, stemmer: Option<&Stemmer>) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|chunk| {
            let trimmed = if config.strip_punctuation {
                chunk.trim_matches(|c: char| !c.is_alphanumeric())
            } else {
                chunk
            };
            if trimmed.is_empty() {
                return None;
            }
            let term = if config.lowercase {
                trimmed.to_lowercase()
            } else {
                trimmed.to_string()
            };
            if term.chars().count() < config.min_token_len || config.is_stopword(&term) {
                return None;
            }
            if config.strip_digits && is_numeric(&term) {
                return None;
            }
            Some(match stemmer {
                Some(s) => s.stem(&term).into_owned(),
                None => term,
            })
        })
        .collect()
}

fn is_numeric(term: &str) -> bool {
    term.chars().any(|c| c.is_numeric()) && !term.chars().any(|c| c.is_alphabetic())
}

/// Tokenize every article of `view` (title prepended to body).
pub fn preprocess_corpus(view: &CorpusView, config: &PreprocessConfig) -> Result<Vec<TokenizedDoc>, PreprocessError> {
    config.validate()?;
    if let Some(a) = view.articles().iter().find(|a| a.language != config.language) {
        return Err(PreprocessError::LanguageMismatch {
            id: a.id.clone(),
            found: a.language.clone(),
            expected: config.language.clone(),
        });
    }
    let stemmer = if config.stemming {
        Some(stemmer_for(&config.language)?)
    } else {
        None
    };
    Ok(view
        .articles()
        .par_iter()
        .map(|a| TokenizedDoc {
            article_id: a.id.clone(),
            tokens: tokenize_with(&a.text(), config, stemmer.as_ref()),
            published_at: a.published_at,
            language: a.language.clone(),
        })
        .collect())
}
