//! Sparse document-term matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenizedDoc;

/// Default `max_sparsity` for [`trim_sparse`].
pub const DEFAULT_MAX_SPARSITY: f64 = 0.99;

#[derive(Debug, Error)]
pub enum DtmError {
    #[error("every document is empty; nothing to count")]
    EmptyCorpus,
    #[error("max_sparsity must lie in (0, 1], got {0}")]
    InvalidSparsity(f64),
    #[error("max_sparsity {0} removes every term; use a larger threshold")]
    AllTermsRemoved(f64),
    #[error("malformed matrix file at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Raw counts of terms per document. Rows follow the input document order;
/// the vocabulary is sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "DtmRepr", into = "DtmRepr")]
pub struct DocumentTermMatrix {
    doc_ids: Vec<String>,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    /// Per document: (term index, count), ascending by term index, counts > 0.
    rows: Vec<Vec<(usize, u32)>>,
}

#[derive(Serialize, Deserialize)]
struct DtmRepr {
    doc_ids: Vec<String>,
    vocabulary: Vec<String>,
    rows: Vec<Vec<(usize, u32)>>,
}

impl From<DtmRepr> for DocumentTermMatrix {
    fn from(r: DtmRepr) -> Self {
        Self::from_parts(r.doc_ids, r.vocabulary, r.rows)
    }
}

impl From<DocumentTermMatrix> for DtmRepr {
    fn from(m: DocumentTermMatrix) -> Self {
        DtmRepr {
            doc_ids: m.doc_ids,
            vocabulary: m.vocabulary,
            rows: m.rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFrequency {
    pub term: String,
    pub total_count: u64,
    pub doc_count: usize,
}

impl DocumentTermMatrix {
    fn from_parts(doc_ids: Vec<String>, vocabulary: Vec<String>, rows: Vec<Vec<(usize, u32)>>) -> Self {
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            doc_ids,
            vocabulary,
            index,
            rows,
        }
    }

    /// Count terms of each token list. Fails only when every list is empty.
    pub fn from_token_lists<D, S>(doc_ids: Vec<String>, docs: &[D]) -> Result<Self, DtmError>
    where
        D: AsRef<[S]> + Sync,
        S: AsRef<str> + Sync,
    {
        assert_eq!(doc_ids.len(), docs.len(), "one id per document");
        let per_doc: Vec<BTreeMap<&str, u32>> = docs
            .par_iter()
            .map(|tokens| {
                let mut counts = BTreeMap::new();
                for t in tokens.as_ref() {
                    *counts.entry(t.as_ref()).or_insert(0u32) += 1;
                }
                counts
            })
            .collect();
        let vocab: BTreeSet<&str> = per_doc.iter().flat_map(|c| c.keys().copied()).collect();
        if vocab.is_empty() {
            return Err(DtmError::EmptyCorpus);
        }
        let vocabulary: Vec<String> = vocab.into_iter().map(str::to_string).collect();
        let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        // BTreeMap iteration is lexicographic, so indices come out ascending.
        let rows = per_doc
            .iter()
            .map(|counts| counts.iter().map(|(t, &c)| (index[t], c)).collect())
            .collect();
        Ok(Self::from_parts(doc_ids, vocabulary, rows))
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn row(&self, doc: usize) -> &[(usize, u32)] {
        &self.rows[doc]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, u32)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn count(&self, doc: usize, term: usize) -> u32 {
        self.rows[doc]
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.rows[doc][i].1)
            .unwrap_or(0)
    }

    /// Documents with no counted term. They are kept so rows stay aligned
    /// with the document sequence used elsewhere.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.n_docs()).filter(|&d| self.rows[d].is_empty()).collect()
    }

    pub fn doc_length(&self, doc: usize) -> u64 {
        self.rows[doc].iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn total_count(&self) -> u64 {
        (0..self.n_docs()).map(|d| self.doc_length(d)).sum()
    }

    /// Number of documents containing each term.
    pub fn doc_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_terms()];
        for row in &self.rows {
            for &(t, _) in row {
                out[t] += 1;
            }
        }
        out
    }

    pub fn term_totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n_terms()];
        for row in &self.rows {
            for &(t, c) in row {
                out[t] += c as u64;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<u32>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0; self.n_terms()];
                for &(t, c) in row {
                    dense[t] = c;
                }
                dense
            })
            .collect()
    }

    /// Keep only the terms flagged in `keep`, re-indexing the rest.
    fn retain_terms(&self, keep: &[bool]) -> Self {
        let mut remap = vec![usize::MAX; self.n_terms()];
        let mut vocabulary = Vec::new();
        for (old, term) in self.vocabulary.iter().enumerate() {
            if keep[old] {
                remap[old] = vocabulary.len();
                vocabulary.push(term.clone());
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|&&(t, _)| keep[t])
                    .map(|&(t, c)| (remap[t], c))
                    .collect()
            })
            .collect();
        Self::from_parts(self.doc_ids.clone(), vocabulary, rows)
    }

    /// Sparse triplet export: `doc_id<TAB>term<TAB>count`, row-major.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, c) in row {
                writeln!(out, "{}\t{}\t{}", self.doc_ids[d], self.vocabulary[t], c)?;
            }
        }
        Ok(())
    }

    /// Vocabulary sidecar, one term per line.
    pub fn write_vocabulary<W: Write>(&self, mut out: W) -> io::Result<()> {
        for term in &self.vocabulary {
            writeln!(out, "{term}")?;
        }
        Ok(())
    }

    pub fn write_doc_ids<W: Write>(&self, mut out: W) -> io::Result<()> {
        for id in &self.doc_ids {
            writeln!(out, "{id}")?;
        }
        Ok(())
    }

    /// Inverse of the three writers above.
    pub fn read<T: BufRead, V: BufRead, D: BufRead>(triplets: T, vocabulary: V, doc_ids: D) -> Result<Self, DtmError> {
        let vocabulary: Vec<String> = vocabulary.lines().collect::<Result<_, _>>()?;
        let doc_ids: Vec<String> = doc_ids.lines().collect::<Result<_, _>>()?;
        let term_pos: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let doc_pos: HashMap<&str, usize> = doc_ids.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut rows: Vec<Vec<(usize, u32)>> = vec![Vec::new(); doc_ids.len()];
        for (i, line) in triplets.lines().enumerate() {
            let line = line?;
            let parse_err = |message: &str| DtmError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(doc), Some(term), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(parse_err("expected three tab-separated fields"));
            };
            let d = *doc_pos.get(doc).ok_or_else(|| parse_err("unknown document"))?;
            let t = *term_pos.get(term).ok_or_else(|| parse_err("unknown term"))?;
            let c: u32 = count.parse().map_err(|_| parse_err("bad count"))?;
            if c > 0 {
                rows[d].push((t, c));
            }
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        Ok(Self::from_parts(doc_ids, vocabulary, rows))
    }
}

pub fn build_dtm(docs: &[TokenizedDoc]) -> Result<DocumentTermMatrix, DtmError> {
    let ids = docs.iter().map(|d| d.article_id.clone()).collect();
    let tokens: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    DocumentTermMatrix::from_token_lists(ids, &tokens)
}

/// Drop terms whose sparsity (share of documents NOT containing them)
/// exceeds `max_sparsity`.
pub fn trim_sparse(dtm: &DocumentTermMatrix, max_sparsity: f64) -> Result<DocumentTermMatrix, DtmError> {
    if !(max_sparsity > 0.0 && max_sparsity <= 1.0) {
        return Err(DtmError::InvalidSparsity(max_sparsity));
    }
    let n = dtm.n_docs();
    // ceil((1 - s) * D), with slack for binary rounding of s
    let min_docs = ((1.0 - max_sparsity) * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let keep: Vec<bool> = dtm.doc_counts().into_iter().map(|c| c >= min_docs).collect();
    if !keep.iter().any(|&k| k) {
        return Err(DtmError::AllTermsRemoved(max_sparsity));
    }
    Ok(dtm.retain_terms(&keep))
}

/// Terms ranked by total count (descending), ties by term (ascending).
pub fn term_frequencies(dtm: &DocumentTermMatrix) -> Vec<TermFrequency> {
    let totals = dtm.term_totals();
    let doc_counts = dtm.doc_counts();
    let mut out: Vec<TermFrequency> = dtm
        .vocabulary()
        .iter()
        .enumerate()
        .filter(|&(t, _)| doc_counts[t] > 0)
        .map(|(t, term)| TermFrequency {
            term: term.clone(),
            total_count: totals[t],
            doc_count: doc_counts[t],
        })
        .collect();
    out.sort_by(|a, b| b.total_count.cmp(&a.total_count).then_with(|| a.term.cmp(&b.term)));
    out
}

pub fn top_terms(dtm: &DocumentTermMatrix, n: usize) -> Vec<TermFrequency> {
    let mut ranked = term_frequencies(dtm);
    ranked.truncate(n);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(docs: &[&[&str]]) -> DocumentTermMatrix {
        let ids = (0..docs.len()).map(|i| format!("d{i}")).collect();
        let lists: Vec<Vec<&str>> = docs.iter().map(|d| d.to_vec()).collect();
        DocumentTermMatrix::from_token_lists(ids, &lists).unwrap()
    }

    #[test]
    fn counts_small_example() {
        let dtm = m(&[&["a", "b", "a"], &["b"]]);
        assert_eq!(dtm.vocabulary(), ["a", "b"]);
        assert_eq!(dtm.to_dense(), vec![vec![2, 1], vec![0, 1]]);
        let one = m(&[&["x"]]);
        assert_eq!(one.to_dense(), vec![vec![1]]);
    }

    #[test]
    fn zero_rows_are_kept() {
        let dtm = m(&[&[], &["b"], &[]]);
        assert_eq!(dtm.n_docs(), 3);
        assert_eq!(dtm.empty_rows(), vec![0, 2]);
        let all_empty: Vec<Vec<String>> = vec![vec![], vec![]];
        assert!(matches!(
            DocumentTermMatrix::from_token_lists::<_, String>(vec!["a".into(), "b".into()], &all_empty),
            Err(DtmError::EmptyCorpus)
        ));
    }

    #[test]
    fn trim_rules() {
        let dtm = m(&[&["a", "b", "a"], &["b"]]);
        assert_eq!(trim_sparse(&dtm, 1.0).unwrap(), dtm);

        let mut docs: Vec<Vec<&str>> = vec![vec!["common"]; 10];
        docs[0].push("rare");
        let ids = (0..10).map(|i| i.to_string()).collect();
        let dtm = DocumentTermMatrix::from_token_lists(ids, &docs).unwrap();
        let trimmed = trim_sparse(&dtm, 0.8).unwrap();
        assert_eq!(trimmed.vocabulary(), ["common"]);
        // 0.9 exactly at the boundary keeps it
        assert_eq!(trim_sparse(&dtm, 0.9).unwrap().n_terms(), 2);
        assert!(matches!(trim_sparse(&dtm, 0.0), Err(DtmError::InvalidSparsity(_))));
        assert!(matches!(trim_sparse(&dtm, 1.5), Err(DtmError::InvalidSparsity(_))));
    }

    #[test]
    fn trim_removing_everything_errors() {
        let dtm = m(&[&["a"], &["b"], &["c"], &["d"]]);
        assert!(matches!(trim_sparse(&dtm, 0.5), Err(DtmError::AllTermsRemoved(_))));
    }

    #[test]
    fn frequencies_and_ties() {
        let dtm = m(&[&["a", "b", "a"], &["b"]]);
        let freqs = term_frequencies(&dtm);
        let flat: Vec<_> = freqs
            .iter()
            .map(|f| (f.term.as_str(), f.total_count, f.doc_count))
            .collect();
        assert_eq!(flat, vec![("a", 2, 1), ("b", 2, 2)]);
        assert_eq!(top_terms(&dtm, 1), freqs[..1].to_vec());
        assert_eq!(top_terms(&dtm, 10), freqs);
    }

    #[test]
    fn triplet_round_trip() {
        let dtm = m(&[&["a", "b", "a"], &[], &["c"]]);
        let (mut t, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new());
        dtm.write_triplets(&mut t).unwrap();
        dtm.write_vocabulary(&mut v).unwrap();
        dtm.write_doc_ids(&mut d).unwrap();
        assert_eq!(String::from_utf8(t.clone()).unwrap(), "d0\ta\t2\nd0\tb\t1\nd2\tc\t1\n");
        let back = DocumentTermMatrix::read(&t[..], &v[..], &d[..]).unwrap();
        assert_eq!(back, dtm);
        assert!(matches!(
            DocumentTermMatrix::read(&b"d0\tzz\t1\n"[..], &v[..], &d[..]),
            Err(DtmError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn serde_rebuilds_index() {
        let dtm = m(&[&["a", "b", "a"], &["b"]]);
        let json = serde_json::to_string(&dtm).unwrap();
        let back: DocumentTermMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back.term_index("b"), Some(1));
        assert_eq!(back, dtm);
    }
}
