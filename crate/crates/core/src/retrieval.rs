//! Demonstration scoring and top-n selection.
//!
//! A demonstration's score is the equally weighted (0.2) sum of BM25
//! similarity between its `v_before` and the query, normalized by the
//! per-query corpus maximum, the two annotated quality deltas, and the
//! relative image size and build duration improvements.

use serde::{Deserialize, Serialize};

use crate::demo_store::{tokenize, Corpus, CorpusStats, Demonstration};
use crate::dockerfile::{serialize, DockerfileAst};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("{what} must be positive, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("cannot select {requested} demonstrations from a corpus of {available}")]
    Selection { requested: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub textual_similarity: f64,
    pub understandability: f64,
    pub maintainability: f64,
    pub image_size: f64,
    pub build_duration: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn new(
        textual_similarity: f64,
        understandability: f64,
        maintainability: f64,
        image_size: f64,
        build_duration: f64,
    ) -> Self {
        let total = WEIGHT
            * (textual_similarity
                + understandability
                + maintainability
                + image_size
                + build_duration);
        ScoreBreakdown {
            textual_similarity,
            understandability,
            maintainability,
            image_size,
            build_duration,
            total,
        }
    }
}

fn idf(stats: &CorpusStats, term: &str) -> f64 {
    let n = stats.doc_count as f64;
    let df = stats.df(term) as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Okapi BM25 of a document for a query. Repeated query terms count once per
/// occurrence.
pub fn bm25(
    query_tokens: &[String],
    doc_tokens: &[String],
    stats: &CorpusStats,
    k1: f64,
    b: f64,
) -> f64 {
    if query_tokens.is_empty() || doc_tokens.is_empty() {
        return 0.0;
    }
    let len_norm = if stats.avg_doc_len > 0.0 {
        doc_tokens.len() as f64 / stats.avg_doc_len
    } else {
        1.0
    };
    query_tokens
        .iter()
        .map(|term| {
            let tf = doc_tokens.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                return 0.0;
            }
            idf(stats, term) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_norm))
        })
        .sum()
}

fn relative_improvement(
    what: &'static str,
    before: f64,
    after: f64,
) -> Result<f64, RetrievalError> {
    for value in [before, after] {
        if !(value > 0.0) {
            return Err(RetrievalError::Domain { what, value });
        }
    }
    Ok(1.0 - after / before)
}

/// `1 - after/before`; positive when the image shrank.
pub fn image_size_score(before_mb: f64, after_mb: f64) -> Result<f64, RetrievalError> {
    relative_improvement("image size", before_mb, after_mb)
}

/// `1 - after/before`; positive when the build got faster.
pub fn build_duration_score(before_s: f64, after_s: f64) -> Result<f64, RetrievalError> {
    relative_improvement("build duration", before_s, after_s)
}

/// Scores one demonstration, given the query-wide BM25 maximum.
pub fn demonstration_score(
    demo: &Demonstration,
    query_tokens: &[String],
    stats: &CorpusStats,
    normalizer: f64,
) -> Result<ScoreBreakdown, RetrievalError> {
    let raw = bm25(query_tokens, &tokenize(&demo.v_before), stats, K1, B);
    score_from_raw(demo, raw, normalizer)
}

fn score_from_raw(
    demo: &Demonstration,
    raw: f64,
    normalizer: f64,
) -> Result<ScoreBreakdown, RetrievalError> {
    let a = &demo.annotation;
    let similarity = if normalizer > 0.0 {
        raw / normalizer
    } else {
        0.0
    };
    Ok(ScoreBreakdown::new(
        similarity,
        f64::from(a.understandability),
        f64::from(a.maintainability),
        image_size_score(a.image_size_before_mb, a.image_size_after_mb)?,
        build_duration_score(a.build_duration_before_s, a.build_duration_after_s)?,
    ))
}

/// Scores every demonstration in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    query_tokens: &[String],
) -> Result<Vec<ScoreBreakdown>, RetrievalError> {
    let raw: Vec<f64> = (0..corpus.len())
        .map(|i| bm25(query_tokens, corpus.tokens(i), corpus.stats(), K1, B))
        .collect();
    let normalizer = raw.iter().copied().fold(0.0, f64::max);
    corpus
        .demos()
        .iter()
        .zip(raw)
        .map(|(d, r)| score_from_raw(d, r, normalizer))
        .collect()
}

/// Top-`n` demonstrations in ascending score order, so the best one comes
/// last. The corpus is ordered by (total, id) ascending and the last `n`
/// entries are taken, which makes the order independent of scan order.
pub fn select_demonstrations<'c>(
    corpus: &'c Corpus,
    query: &DockerfileAst,
    n: usize,
) -> Result<Vec<(&'c Demonstration, ScoreBreakdown)>, RetrievalError> {
    if n > corpus.len() {
        return Err(RetrievalError::Selection {
            requested: n,
            available: corpus.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let query_tokens = tokenize(&serialize(query));
    let scores = score_corpus(corpus, &query_tokens)?;
    let mut ranked: Vec<_> = corpus.demos().iter().zip(scores).collect();
    ranked.sort_by(|(da, sa), (db, sb)| {
        sa.total
            .total_cmp(&sb.total)
            .then_with(|| da.id.cmp(&db.id))
    });
    Ok(ranked.split_off(ranked.len() - n))
}
