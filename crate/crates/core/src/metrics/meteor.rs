//! METEOR, exact-match stage: a one-to-one unigram alignment that maximizes
//! matches and then minimizes chunks, combined into a recall-weighted
//! harmonic mean with a fragmentation penalty. No stemming or synonymy
//! modules; parameters alpha 0.9, beta 3, gamma 0.5.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{validate, Components, MeteorComponents, Metric, MetricError, ScoreReport};
use crate::corpus::Document;

pub(crate) const ALPHA: f64 = 0.9;
pub(crate) const BETA: f64 = 3.0;
pub(crate) const GAMMA: f64 = 0.5;

/// Search budget for the exact chunk minimization before falling back to
/// the greedy left-to-right alignment.
const MAX_SEARCH_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct AlignmentStats {
    pub matches: u64,
    pub chunks: u64,
}

struct ChunkSearch<'a> {
    hyp: &'a [&'a str],
    ref_positions: HashMap<&'a str, Vec<usize>>,
    /// How many occurrences of each hypothesis word must be matched.
    quota: HashMap<&'a str, u64>,
    nodes: usize,
    best: u64,
}

impl<'a> ChunkSearch<'a> {
    /// Branch and bound over which hypothesis occurrence maps to which
    /// reference occurrence. Chunks only grow along a branch, so the bound
    /// is the current chunk count.
    fn run(&mut self, i: usize, used: &mut Vec<bool>, last: Option<(usize, usize)>, chunks: u64) {
        if chunks >= self.best {
            return;
        }
        self.nodes += 1;
        if self.nodes > MAX_SEARCH_NODES {
            return;
        }
        let Some(&word) = self.hyp.get(i) else {
            if self.quota.values().all(|&q| q == 0) {
                self.best = chunks;
            }
            return;
        };
        let remaining = self.quota.get(word).copied().unwrap_or(0);
        if remaining > 0 {
            let positions = self.ref_positions.get(word).cloned().unwrap_or_default();
            for j in positions {
                if used[j] {
                    continue;
                }
                let extends = matches!(last, Some((li, lj)) if li + 1 == i && lj + 1 == j);
                let next_chunks = if extends { chunks } else { chunks + 1 };
                used[j] = true;
                *self.quota.get_mut(word).unwrap() -= 1;
                self.run(i + 1, used, Some((i, j)), next_chunks);
                *self.quota.get_mut(word).unwrap() += 1;
                used[j] = false;
            }
        }
        // Skipping is allowed only while enough later occurrences remain to
        // meet the quota.
        let later = self.hyp[i + 1..].iter().filter(|&&w| w == word).count() as u64;
        if later >= remaining {
            self.run(i + 1, used, last, chunks);
        }
    }
}

/// Greedy fallback: match left to right to the first free reference
/// occurrence, preferring the one that extends the current chunk.
fn greedy_alignment(hyp: &[&str], reference: &[&str]) -> u64 {
    let mut ref_free: Vec<bool> = vec![true; reference.len()];
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, &w) in reference.iter().enumerate() {
        positions.entry(w).or_default().push(j);
    }
    let mut remaining: HashMap<&str, u64> = HashMap::new();
    let hyp_counts = word_counts(hyp);
    let ref_counts = word_counts(reference);
    for (&w, &c) in &hyp_counts {
        remaining.insert(w, c.min(ref_counts.get(w).copied().unwrap_or(0)));
    }
    let mut chunks = 0u64;
    let mut last: Option<(usize, usize)> = None;
    for (i, &w) in hyp.iter().enumerate() {
        let Some(q) = remaining.get_mut(w) else { continue };
        if *q == 0 {
            continue;
        }
        let candidates = &positions[w];
        let continuation = last.and_then(|(li, lj)| {
            (li + 1 == i && lj + 1 < reference.len() && reference[lj + 1] == w && ref_free[lj + 1])
                .then_some(lj + 1)
        });
        let j = continuation.or_else(|| candidates.iter().copied().find(|&j| ref_free[j]));
        if let Some(j) = j {
            let extends = matches!(last, Some((li, lj)) if li + 1 == i && lj + 1 == j);
            if !extends {
                chunks += 1;
            }
            ref_free[j] = false;
            *q -= 1;
            last = Some((i, j));
        }
    }
    chunks
}

fn word_counts<'a>(tokens: &[&'a str]) -> HashMap<&'a str, u64> {
    let mut counts = HashMap::new();
    for &t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Exact-match alignment statistics: the match count is forced (per word,
/// the smaller of the two occurrence counts); chunks are minimized over all
/// one-to-one assignments.
pub(crate) fn align_stats(hyp: &[&str], reference: &[&str]) -> AlignmentStats {
    let hyp_counts = word_counts(hyp);
    let ref_counts = word_counts(reference);
    let matches: u64 = hyp_counts
        .iter()
        .map(|(w, &c)| c.min(ref_counts.get(w).copied().unwrap_or(0)))
        .sum();
    if matches == 0 {
        return AlignmentStats {
            matches: 0,
            chunks: 0,
        };
    }
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, &w) in reference.iter().enumerate() {
        positions.entry(w).or_default().push(j);
    }
    let quota: HashMap<&str, u64> = hyp_counts
        .iter()
        .map(|(&w, &c)| (w, c.min(ref_counts.get(w).copied().unwrap_or(0))))
        .collect();
    let mut search = ChunkSearch {
        hyp,
        ref_positions: positions,
        quota,
        nodes: 0,
        best: matches + 1,
    };
    let mut used = vec![false; reference.len()];
    search.run(0, &mut used, None, 0);
    let chunks = if search.nodes > MAX_SEARCH_NODES || search.best > matches {
        greedy_alignment(hyp, reference)
    } else {
        search.best
    };
    AlignmentStats { matches, chunks }
}

fn fmean(precision: f64, recall: f64) -> f64 {
    if precision == 0.0 || recall == 0.0 {
        return 0.0;
    }
    precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall)
}

fn segment_score(stats: AlignmentStats, hyp_len: u64, ref_len: u64) -> f64 {
    if stats.matches == 0 || hyp_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = stats.matches as f64 / hyp_len as f64;
    let r = stats.matches as f64 / ref_len as f64;
    let penalty = GAMMA * (stats.chunks as f64 / stats.matches as f64).powf(BETA);
    fmean(p, r) * (1.0 - penalty)
}

/// METEOR with the best reference chosen per segment by score.
pub fn meteor(hyp: &Document, refs: &[Document]) -> Result<ScoreReport, MetricError> {
    validate(hyp, refs)?;

    let per: Vec<(AlignmentStats, u64, u64, f64)> = hyp
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| {
            let hyp_tokens = sentence.surfaces();
            refs.iter()
                .map(|r| {
                    let ref_tokens = r.sentences[i].surfaces();
                    let stats = align_stats(&hyp_tokens, &ref_tokens);
                    let score =
                        segment_score(stats, hyp_tokens.len() as u64, ref_tokens.len() as u64);
                    (stats, hyp_tokens.len() as u64, ref_tokens.len() as u64, score)
                })
                .max_by(|a, b| a.3.partial_cmp(&b.3).expect("scores are finite"))
                .expect("at least one reference")
        })
        .collect();

    let mut matches = 0u64;
    let mut chunks = 0u64;
    let mut hyp_length = 0u64;
    let mut ref_length = 0u64;
    let mut per_segment = Vec::with_capacity(per.len());
    for (stats, h, r, score) in &per {
        matches += stats.matches;
        chunks += stats.chunks;
        hyp_length += h;
        ref_length += r;
        per_segment.push(*score);
    }

    let (precision, recall, f, penalty, corpus_score) = if matches == 0 {
        (0.0, 0.0, 0.0, 0.0, 0.0)
    } else {
        let p = matches as f64 / hyp_length as f64;
        let r = matches as f64 / ref_length as f64;
        let f = fmean(p, r);
        let penalty = GAMMA * (chunks as f64 / matches as f64).powf(BETA);
        (p, r, f, penalty, f * (1.0 - penalty))
    };

    Ok(ScoreReport {
        metric: Metric::Meteor,
        corpus_score,
        per_segment,
        components: Components::Meteor(MeteorComponents {
            matches,
            hyp_length,
            ref_length,
            chunks,
            precision,
            recall,
            fmean: f,
            penalty,
            alpha: ALPHA,
            beta: BETA,
            gamma: GAMMA,
            variant: "exact-match stage only, best reference by score".to_string(),
        }),
    })
}
