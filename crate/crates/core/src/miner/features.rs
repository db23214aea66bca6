//! Sentence-pair features for the similarity classifier. Everything here is
//! computable from a probabilistic 1-gram dictionary and the sentences
//! themselves: lexical coverage both ways, length ratios, shared
//! number/punctuation overlap, and relative position distance.

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::miner::dictionary::ProbDictionary;

pub const FEATURE_DIM: usize = 6;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "coverage_src_tgt",
    "coverage_tgt_src",
    "char_len_ratio",
    "token_len_ratio",
    "numpunct_overlap",
    "position_distance",
];

/// Length ratios are clipped here so a single degenerate pair cannot blow
/// up a decision value.
pub const RATIO_CLIP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_DIM] {
        &self.0
    }
}

fn ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        1.0
    } else if y == 0.0 {
        RATIO_CLIP
    } else {
        (x / y).clamp(0.0, RATIO_CLIP)
    }
}

/// Fraction of `from` tokens covered by a dictionary entry into `to`,
/// each covered token weighted by its best translation probability.
fn coverage(
    from: &Sentence,
    to: &Sentence,
    best: impl Fn(&str, &str) -> Option<f64>,
) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for s in &from.tokens {
        let mut max_p = 0.0f64;
        for t in &to.tokens {
            if let Some(p) = best(&s.surface, &t.surface) {
                max_p = max_p.max(p);
            }
        }
        sum += max_p;
    }
    sum / from.len() as f64
}

fn numpunct_set(s: &Sentence) -> std::collections::HashSet<&str> {
    s.tokens
        .iter()
        .filter(|t| t.is_numeric() || t.is_punctuation())
        .map(|t| t.surface.as_str())
        .collect()
}

/// Build the feature vector for one candidate pair. `rel_pos_*` are the
/// sentence positions normalized to [0,1] within their documents; pass 0.0
/// for both when positions are unknown (e.g. classifier training pairs).
pub fn featurize(
    a: &Sentence,
    b: &Sentence,
    dict: &ProbDictionary,
    rel_pos_a: f64,
    rel_pos_b: f64,
) -> FeatureVector {
    let cov_ab = coverage(a, b, |s, t| dict.prob(s, t));
    let cov_ba = coverage(b, a, |t, s| dict.prob(s, t));
    let chars_a: usize = a.tokens.iter().map(|t| t.surface.chars().count()).sum();
    let chars_b: usize = b.tokens.iter().map(|t| t.surface.chars().count()).sum();
    let set_a = numpunct_set(a);
    let set_b = numpunct_set(b);
    let overlap = if set_a.is_empty() && set_b.is_empty() {
        0.0
    } else {
        set_a.intersection(&set_b).count() as f64 / set_a.len().max(set_b.len()) as f64
    };
    FeatureVector([
        cov_ab,
        cov_ba,
        ratio(chars_a as f64, chars_b as f64),
        ratio(a.len() as f64, b.len() as f64),
        overlap,
        (rel_pos_a - rel_pos_b).abs(),
    ])
}
