//! Translation quality metrics: BLEU, NIST, TER, and METEOR, at segment and
//! corpus level. Corpus scores are computed from pooled component statistics,
//! never by averaging segment scores.
//!
//! The exact variants are pinned and recorded in each report: BLEU is
//! corpus-level, case-sensitive, uniform 4-gram weights; NIST uses
//! information-weighted n-gram matches up to 5-grams; TER uses the greedy
//! shift heuristic; METEOR is the exact-match stage with alpha 0.9,
//! beta 3, gamma 0.5.

mod bleu;
mod meteor;
mod nist;
mod ter;

pub use bleu::bleu;
pub use meteor::meteor;
pub use nist::nist;
pub use ter::{ter, ter_edits, TerEdits};

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Document, Sentence, Token};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("hypothesis has {hyp} segments but reference {ref_index} has {reference}")]
    LengthMismatch {
        hyp: usize,
        ref_index: usize,
        reference: usize,
    },
    #[error("at least one reference document is required")]
    NoReferences,
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("reference {ref_index} has a zero-length sentence at segment {segment}")]
    ZeroLengthReference { ref_index: usize, segment: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Nist,
    Ter,
    Meteor,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Nist => "nist",
            Metric::Ter => "ter",
            Metric::Meteor => "meteor",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bleu" => Some(Metric::Bleu),
            "nist" => Some(Metric::Nist),
            "ter" => Some(Metric::Ter),
            "meteor" => Some(Metric::Meteor),
            _ => None,
        }
    }
}

/// Metric-specific component statistics, sufficient to recompute the corpus
/// score.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Components {
    Bleu(BleuComponents),
    Nist(NistComponents),
    Ter(TerComponents),
    Meteor(MeteorComponents),
}

#[derive(Debug, Clone, Serialize)]
pub struct BleuComponents {
    pub max_n: usize,
    /// Clipped corpus-level n-gram precisions, index 0 = unigrams.
    pub precisions: Vec<f64>,
    pub matched: Vec<u64>,
    pub total: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_length: u64,
    /// Sum of per-segment closest reference lengths.
    pub ref_length: u64,
    pub variant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NistComponents {
    pub max_n: usize,
    /// Summed information of matched n-grams per order, index 0 = unigrams.
    pub matched_info: Vec<f64>,
    /// Total hypothesis n-grams per order.
    pub total: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_length: u64,
    pub mean_ref_length: f64,
    pub variant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TerComponents {
    pub insertions: u64,
    pub deletions: u64,
    pub substitutions: u64,
    pub shifts: u64,
    pub total_edits: u64,
    pub ref_length: u64,
    pub variant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeteorComponents {
    pub matches: u64,
    pub hyp_length: u64,
    pub ref_length: u64,
    pub chunks: u64,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub variant: String,
}

/// Per-segment and corpus-level scores for one metric.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub metric: Metric,
    pub corpus_score: f64,
    pub per_segment: Vec<f64>,
    pub components: Components,
}

pub(crate) fn validate(hyp: &Document, refs: &[Document]) -> Result<(), MetricError> {
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    if hyp.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    for (i, r) in refs.iter().enumerate() {
        if r.len() != hyp.len() {
            return Err(MetricError::LengthMismatch {
                hyp: hyp.len(),
                ref_index: i,
                reference: r.len(),
            });
        }
    }
    Ok(())
}

/// Count n-grams of one order over a token sequence. Keys are the token
/// surfaces joined with an unprintable separator.
pub(crate) fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n && n > 0 {
        for window in tokens.windows(n) {
            *counts.entry(window.join("\u{1}")).or_insert(0) += 1;
        }
    }
    counts
}

pub(crate) fn ngram_total(tokens: usize, n: usize) -> u64 {
    (tokens + 1).saturating_sub(n) as u64
}

/// Lowercase every token, re-deriving casing; used by the `--lc` scoring
/// flag (scoring defaults to case-sensitive).
pub fn lowercase_document(doc: &Document) -> Document {
    Document::new(
        doc.id.clone(),
        doc.sentences
            .iter()
            .map(|s| {
                Sentence::from_tokens(
                    s.tokens
                        .iter()
                        .map(|t| Token::new(t.surface.to_lowercase()))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Score one hypothesis against references with every requested metric.
pub fn score_all(
    hyp: &Document,
    refs: &[Document],
    metrics: &[Metric],
) -> Result<Vec<ScoreReport>, MetricError> {
    metrics
        .iter()
        .map(|m| match m {
            Metric::Bleu => bleu(hyp, refs, 4),
            Metric::Nist => nist(hyp, refs, 5),
            Metric::Ter => ter(hyp, refs),
            Metric::Meteor => meteor(hyp, refs),
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn doc(lines: &[&str]) -> Document {
    Document::new(
        "test",
        lines.iter().map(|l| crate::corpus::tokenize(l)).collect(),
    )
}
