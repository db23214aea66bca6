//! Corpus-level BLEU: geometric mean of clipped n-gram precisions times a
//! brevity penalty. Segment-level diagnostics use add-one smoothing on the
//! higher-order precisions, which would otherwise be zero on most short
//! sentences.

use rayon::prelude::*;

use super::{
    ngram_counts, ngram_total, validate, BleuComponents, Components, Metric, MetricError,
    ScoreReport,
};
use crate::corpus::Document;

/// Per-segment clipped-match statistics.
struct SegmentStats {
    matched: Vec<u64>,
    total: Vec<u64>,
    hyp_len: u64,
    closest_ref_len: u64,
}

fn segment_stats(hyp: &[&str], refs: &[Vec<&str>], max_n: usize) -> SegmentStats {
    let mut matched = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    for n in 1..=max_n {
        let hyp_counts = ngram_counts(hyp, n);
        total[n - 1] = ngram_total(hyp.len(), n);
        for (gram, &c) in &hyp_counts {
            let ref_max = refs
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matched[n - 1] += c.min(ref_max);
        }
    }
    // Closest reference length; ties break toward the shorter reference.
    let hyp_len = hyp.len() as u64;
    let closest_ref_len = refs
        .iter()
        .map(|r| r.len() as u64)
        .min_by_key(|&len| (len.abs_diff(hyp_len), len))
        .unwrap_or(0);
    SegmentStats {
        matched,
        total,
        hyp_len,
        closest_ref_len,
    }
}

fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn geometric_score(matched: &[u64], total: &[u64], bp: f64, smoothed: bool) -> f64 {
    let max_n = matched.len();
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        // Add-one smoothing applies to orders >= 2 only, and only for the
        // per-segment diagnostics.
        let add = if smoothed && n >= 2 { 1 } else { 0 };
        let m = matched[n - 1] + add;
        let t = total[n - 1] + add;
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    bp * (log_sum / max_n as f64).exp()
}

/// Corpus BLEU with clipped n-gram precisions up to `max_n` and uniform
/// weights. Any zero corpus-level precision yields a zero score with the
/// components still reported.
pub fn bleu(hyp: &Document, refs: &[Document], max_n: usize) -> Result<ScoreReport, MetricError> {
    validate(hyp, refs)?;
    let stats: Vec<SegmentStats> = hyp
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| {
            let hyp_tokens = sentence.surfaces();
            let ref_tokens: Vec<Vec<&str>> =
                refs.iter().map(|r| r.sentences[i].surfaces()).collect();
            segment_stats(&hyp_tokens, &ref_tokens, max_n)
        })
        .collect();

    let mut matched = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    let mut hyp_length = 0u64;
    let mut ref_length = 0u64;
    for s in &stats {
        for n in 0..max_n {
            matched[n] += s.matched[n];
            total[n] += s.total[n];
        }
        hyp_length += s.hyp_len;
        ref_length += s.closest_ref_len;
    }

    let bp = brevity_penalty(hyp_length, ref_length);
    let corpus_score = geometric_score(&matched, &total, bp, false);
    let precisions: Vec<f64> = (0..max_n)
        .map(|n| {
            if total[n] == 0 {
                0.0
            } else {
                matched[n] as f64 / total[n] as f64
            }
        })
        .collect();

    let per_segment: Vec<f64> = stats
        .iter()
        .map(|s| {
            let bp = brevity_penalty(s.hyp_len, s.closest_ref_len);
            geometric_score(&s.matched, &s.total, bp, true)
        })
        .collect();

    Ok(ScoreReport {
        metric: Metric::Bleu,
        corpus_score,
        per_segment,
        components: Components::Bleu(BleuComponents {
            max_n,
            precisions,
            matched,
            total,
            brevity_penalty: bp,
            hyp_length,
            ref_length,
            variant: "corpus-level, case-sensitive, uniform weights, closest ref length, \
                      add-one segment smoothing for n>=2"
                .to_string(),
        }),
    })
}
