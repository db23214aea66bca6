//! NIST: n-gram matches weighted by information gain from the reference
//! statistics, summed over orders as an arithmetic mean of matches, with the
//! mteval-style length penalty.

use std::collections::HashMap;

use super::{
    ngram_counts, ngram_total, validate, Components, Metric, MetricError, NistComponents,
    ScoreReport,
};
use crate::corpus::Document;

/// beta chosen so the penalty is exactly 0.5 at a length ratio of 2/3.
fn beta() -> f64 {
    0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2)
}

fn length_penalty(hyp_len: f64, mean_ref_len: f64) -> f64 {
    if mean_ref_len <= 0.0 || hyp_len <= 0.0 {
        return 0.0;
    }
    let ratio = (hyp_len / mean_ref_len).min(1.0);
    (beta() * ratio.ln().powi(2)).exp()
}

/// Reference n-gram statistics pooled over all reference documents; the
/// information of an n-gram is log2(count(prefix) / count(ngram)), with the
/// total reference word count standing in for the empty prefix.
struct InfoTable {
    counts: Vec<HashMap<String, u64>>,
    total_words: u64,
}

impl InfoTable {
    fn build(refs: &[Document], max_n: usize) -> InfoTable {
        let mut counts: Vec<HashMap<String, u64>> = vec![HashMap::new(); max_n];
        let mut total_words = 0u64;
        for doc in refs {
            for sentence in &doc.sentences {
                let tokens = sentence.surfaces();
                total_words += tokens.len() as u64;
                for n in 1..=max_n {
                    for (gram, c) in ngram_counts(&tokens, n) {
                        *counts[n - 1].entry(gram).or_insert(0) += c;
                    }
                }
            }
        }
        InfoTable {
            counts,
            total_words,
        }
    }

    fn info(&self, gram: &str, n: usize) -> f64 {
        let Some(&count) = self.counts[n - 1].get(gram) else {
            return 0.0;
        };
        let prefix_count = if n == 1 {
            self.total_words
        } else {
            let prefix = gram.rsplit_once('\u{1}').map(|(p, _)| p).unwrap_or(gram);
            self.counts[n - 2].get(prefix).copied().unwrap_or(count)
        };
        (prefix_count as f64 / count as f64).log2()
    }
}

/// NIST score with information weights up to `max_n`. Exact duplicate
/// reference documents are dropped first: they add no information but would
/// skew the pooled counts and the mean reference length.
pub fn nist(hyp: &Document, refs: &[Document], max_n: usize) -> Result<ScoreReport, MetricError> {
    validate(hyp, refs)?;
    let mut distinct: Vec<&Document> = Vec::new();
    for r in refs {
        if !distinct.iter().any(|d| d.sentences == r.sentences) {
            distinct.push(r);
        }
    }
    let refs: Vec<Document> = distinct.into_iter().cloned().collect();
    let refs = &refs[..];
    let info = InfoTable::build(refs, max_n);

    let mut matched_info = vec![0.0f64; max_n];
    let mut total = vec![0u64; max_n];
    let mut hyp_length = 0u64;
    let mut per_segment = Vec::with_capacity(hyp.len());

    let mut seg_matched: Vec<Vec<f64>> = Vec::with_capacity(hyp.len());
    let mut seg_total: Vec<Vec<u64>> = Vec::with_capacity(hyp.len());
    let mut seg_hyp_len: Vec<u64> = Vec::with_capacity(hyp.len());
    let mut seg_ref_mean: Vec<f64> = Vec::with_capacity(hyp.len());

    for (i, sentence) in hyp.sentences.iter().enumerate() {
        let hyp_tokens = sentence.surfaces();
        let ref_tokens: Vec<Vec<&str>> = refs.iter().map(|r| r.sentences[i].surfaces()).collect();
        let mut m = vec![0.0f64; max_n];
        let mut t = vec![0u64; max_n];
        for n in 1..=max_n {
            let hyp_counts = ngram_counts(&hyp_tokens, n);
            t[n - 1] = ngram_total(hyp_tokens.len(), n);
            for (gram, &c) in &hyp_counts {
                let ref_max = ref_tokens
                    .iter()
                    .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                let matched = c.min(ref_max);
                if matched > 0 {
                    m[n - 1] += matched as f64 * info.info(gram, n);
                }
            }
        }
        for n in 0..max_n {
            matched_info[n] += m[n];
            total[n] += t[n];
        }
        hyp_length += hyp_tokens.len() as u64;
        let ref_mean = ref_tokens.iter().map(|r| r.len() as u64).sum::<u64>() as f64
            / ref_tokens.len() as f64;
        seg_matched.push(m);
        seg_total.push(t);
        seg_hyp_len.push(hyp_tokens.len() as u64);
        seg_ref_mean.push(ref_mean);
    }

    let mean_ref_length = seg_ref_mean.iter().sum::<f64>();
    let bp = length_penalty(hyp_length as f64, mean_ref_length);
    let corpus_sum: f64 = (0..max_n)
        .map(|n| {
            if total[n] == 0 {
                0.0
            } else {
                matched_info[n] / total[n] as f64
            }
        })
        .sum();
    let corpus_score = corpus_sum * bp;

    for i in 0..hyp.len() {
        let sum: f64 = (0..max_n)
            .map(|n| {
                if seg_total[i][n] == 0 {
                    0.0
                } else {
                    seg_matched[i][n] / seg_total[i][n] as f64
                }
            })
            .sum();
        let bp_i = length_penalty(seg_hyp_len[i] as f64, seg_ref_mean[i]);
        per_segment.push(sum * bp_i);
    }

    Ok(ScoreReport {
        metric: Metric::Nist,
        corpus_score,
        per_segment,
        components: Components::Nist(NistComponents {
            max_n,
            matched_info,
            total,
            brevity_penalty: bp,
            hyp_length,
            mean_ref_length,
            variant: "mteval-style info weights from pooled references, clipped matches, \
                      penalty 0.5 at length ratio 2/3"
                .to_string(),
        }),
    })
}
