//! Re-inject what a lemmatizer destroys - capitalization, punctuation, and
//! unknown tokens such as names, numbers, or abbreviations - by aligning the
//! original token stream against the lemmatized one and merging them back
//! together.

use serde::Serialize;

use crate::corpus::{recase, Sentence, Token};

/// Alignment operations on original tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOp {
    /// Identical ignoring case.
    Match,
    /// The lemmatizer dropped this token entirely.
    Dropped,
    /// Aligned to a lemma with a different surface (inflection stripped).
    Substituted,
}

/// One link per original token, in order; `lemma_index` is None for drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Link {
    pub orig_index: usize,
    pub lemma_index: Option<usize>,
    pub op: LinkOp,
}

/// Monotone alignment between an original sentence and its lemmatized form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestorationAlignment {
    pub links: Vec<Link>,
}

// Alignment costs, scaled by 10 to keep the table in integers:
// exact (case-insensitive) match 0, shared-prefix substitution 3
// (Polish inflection mostly alters suffixes), anything else 10.
const COST_MATCH: u32 = 0;
const COST_PREFIX: u32 = 3;
const COST_OTHER: u32 = 10;
const COST_GAP: u32 = 10;
// Worse than a drop plus an insert: tokens priced this way never pair up.
const COST_FORBIDDEN: u32 = 2 * COST_GAP + 1;
const PREFIX_MIN_CHARS: usize = 3;

fn link_cost(orig: &Token, lemma: &Token) -> u32 {
    let a = orig.surface.to_lowercase();
    let b = lemma.surface.to_lowercase();
    if a == b {
        return COST_MATCH;
    }
    // Punctuation and numbers must survive restoration verbatim, so a
    // non-identical pairing involving one is never allowed; the aligner
    // falls back to drop + insert and the drop path re-inserts the token.
    if orig.is_non_alphabetic() || lemma.is_non_alphabetic() {
        return COST_FORBIDDEN;
    }
    let shared = a
        .chars()
        .zip(b.chars())
        .take_while(|(x, y)| x == y)
        .count();
    if shared >= PREFIX_MIN_CHARS {
        COST_PREFIX
    } else {
        COST_OTHER
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    /// Align orig[i] with lemma[j].
    Pair,
    /// orig[i] has no counterpart.
    Drop,
    /// lemma[j] has no counterpart.
    Insert,
}

/// Minimum-cost monotone alignment path. Ties prefer pairing, then
/// dropping, then insertion, so the backtrace is deterministic.
fn alignment_path(orig: &Sentence, lemma: &Sentence) -> Vec<Step> {
    let n = orig.len();
    let m = lemma.len();
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i as u32 * COST_GAP;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j as u32 * COST_GAP;
    }
    for i in 1..=n {
        for j in 1..=m {
            let pair = dp[i - 1][j - 1] + link_cost(&orig.tokens[i - 1], &lemma.tokens[j - 1]);
            let drop = dp[i - 1][j] + COST_GAP;
            let insert = dp[i][j - 1] + COST_GAP;
            dp[i][j] = pair.min(drop).min(insert);
        }
    }
    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0
            && j > 0
            && dp[i][j] == dp[i - 1][j - 1] + link_cost(&orig.tokens[i - 1], &lemma.tokens[j - 1])
        {
            steps.push(Step::Pair);
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[i][j] == dp[i - 1][j] + COST_GAP {
            steps.push(Step::Drop);
            i -= 1;
        } else {
            steps.push(Step::Insert);
            j -= 1;
        }
    }
    steps.reverse();
    steps
}

/// Align an original sentence with its lemmatized output. Every original
/// token appears exactly once; tokens the lemmatizer dropped are marked.
pub fn align_streams(orig: &Sentence, lemma: &Sentence) -> RestorationAlignment {
    let mut links = Vec::with_capacity(orig.len());
    let (mut i, mut j) = (0usize, 0usize);
    for step in alignment_path(orig, lemma) {
        match step {
            Step::Pair => {
                let op = if link_cost(&orig.tokens[i], &lemma.tokens[j]) == COST_MATCH {
                    LinkOp::Match
                } else {
                    LinkOp::Substituted
                };
                links.push(Link {
                    orig_index: i,
                    lemma_index: Some(j),
                    op,
                });
                i += 1;
                j += 1;
            }
            Step::Drop => {
                links.push(Link {
                    orig_index: i,
                    lemma_index: None,
                    op: LinkOp::Dropped,
                });
                i += 1;
            }
            Step::Insert => {
                j += 1;
            }
        }
    }
    RestorationAlignment { links }
}

/// Rebuild a restored sentence from the lemma stream: aligned lemmas get the
/// original token's casing back, dropped originals (punctuation, numbers,
/// names the lemmatizer lost) are re-inserted at their alignment positions,
/// and lemma-only tokens pass through untouched.
pub fn restore(orig: &Sentence, lemma: &Sentence) -> Sentence {
    let mut tokens = Vec::with_capacity(lemma.len() + orig.len());
    let (mut i, mut j) = (0usize, 0usize);
    for step in alignment_path(orig, lemma) {
        match step {
            Step::Pair => {
                tokens.push(Token::new(recase(&lemma.tokens[j].surface, &orig.tokens[i])));
                i += 1;
                j += 1;
            }
            Step::Drop => {
                tokens.push(orig.tokens[i].clone());
                i += 1;
            }
            Step::Insert => {
                tokens.push(lemma.tokens[j].clone());
                j += 1;
            }
        }
    }
    Sentence::from_tokens(tokens)
}
