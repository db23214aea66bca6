//! Translation Edit Rate: insertions, deletions, substitutions, and block
//! shifts per reference word, using the greedy shift heuristic (exact shift
//! search is NP-hard). Shift spans are capped at 10 tokens and shift
//! distance at 50, the usual tercom limits.

use rayon::prelude::*;

use super::{validate, Components, Metric, MetricError, ScoreReport, TerComponents};
use crate::corpus::Document;

const MAX_SHIFT_SIZE: usize = 10;
const MAX_SHIFT_DIST: usize = 50;
/// Hypotheses up to this length get an exact shift search; the greedy
/// heuristic can miss the optimum by an edit even on tiny inputs, and the
/// exact search is cheap there.
const EXACT_SHIFT_LIMIT: usize = 8;
/// State budget for the exact search; beyond it the best sequence found so
/// far stands (still a valid shift sequence, never below the optimum).
const EXACT_SEARCH_BUDGET: usize = 500_000;

/// Edit counts for one hypothesis/reference pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TerEdits {
    pub insertions: u64,
    pub deletions: u64,
    pub substitutions: u64,
    pub shifts: u64,
}

impl TerEdits {
    pub fn total(&self) -> u64 {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

/// Word-level Levenshtein distance.
fn edit_distance(a: &[&str], b: &[&str]) -> u64 {
    let (n, m) = (a.len(), b.len());
    let mut prev: Vec<u64> = (0..=m as u64).collect();
    let mut cur = vec![0u64; m + 1];
    for i in 1..=n {
        cur[0] = i as u64;
        for j in 1..=m {
            let sub = prev[j - 1] + u64::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Levenshtein with a backtrace splitting the distance into edit types.
/// Ties prefer substitution, then deletion, then insertion.
fn edit_distance_ops(a: &[&str], b: &[&str]) -> (u64, u64, u64) {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0u64; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i as u64;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j as u64;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[i - 1][j - 1] + u64::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let (mut ins, mut del, mut sub) = (0u64, 0u64, 0u64);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + u64::from(a[i - 1] != b[j - 1]) {
            if a[i - 1] != b[j - 1] {
                sub += 1;
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            // Extra hypothesis word.
            ins += 1;
            i -= 1;
        } else {
            // Missing reference word.
            del += 1;
            j -= 1;
        }
    }
    (ins, del, sub)
}

/// Move `tokens[start..start+len]` so that it begins at `dest` in the
/// remaining sequence.
fn shifted<'a>(tokens: &[&'a str], start: usize, len: usize, dest: usize) -> Vec<&'a str> {
    let mut rest: Vec<&str> = Vec::with_capacity(tokens.len() - len);
    rest.extend_from_slice(&tokens[..start]);
    rest.extend_from_slice(&tokens[start + len..]);
    let mut out = Vec::with_capacity(tokens.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(&tokens[start..start + len]);
    out.extend_from_slice(&rest[dest..]);
    out
}

/// Breadth-first search over shift sequences: each level applies one more
/// shift, a level only opens while it can still beat the best total found.
/// Returns the winning token order and its shift count.
fn exact_shifts<'a>(hyp: &[&'a str], reference: &[&str]) -> (Vec<&'a str>, u64) {
    let mut best_total = edit_distance(hyp, reference);
    let mut best_state: Vec<&str> = hyp.to_vec();
    let mut best_shifts = 0u64;
    let mut frontier: Vec<Vec<&str>> = vec![hyp.to_vec()];
    let mut seen: std::collections::HashSet<Vec<&str>> = std::collections::HashSet::new();
    seen.insert(hyp.to_vec());
    let mut depth = 0u64;
    let mut visited = 0usize;
    while !frontier.is_empty() && depth + 1 < best_total && visited < EXACT_SEARCH_BUDGET {
        depth += 1;
        let mut next = Vec::new();
        for state in frontier {
            let n = state.len();
            for start in 0..n {
                for len in 1..=MAX_SHIFT_SIZE.min(n - start) {
                    for dest in 0..=(n - len) {
                        if dest == start || start.abs_diff(dest) > MAX_SHIFT_DIST {
                            continue;
                        }
                        let candidate = shifted(&state, start, len, dest);
                        if seen.insert(candidate.clone()) {
                            visited += 1;
                            let total = depth + edit_distance(&candidate, reference);
                            if total < best_total {
                                best_total = total;
                                best_state = candidate.clone();
                                best_shifts = depth;
                            }
                            next.push(candidate);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    (best_state, best_shifts)
}

/// Compute TER edit counts for one sentence pair: repeatedly apply the
/// block shift that most reduces the remaining edit distance, then settle
/// the rest with word-level edit distance. Short hypotheses (at most
/// `EXACT_SHIFT_LIMIT` tokens) get an exact shift search instead of the
/// greedy heuristic. Set `allow_shifts` to false for plain Levenshtein
/// accounting.
pub fn ter_edits(hyp: &[&str], reference: &[&str], allow_shifts: bool) -> TerEdits {
    if allow_shifts && hyp.len() <= EXACT_SHIFT_LIMIT {
        let (state, shifts) = exact_shifts(hyp, reference);
        let (ins, del, sub) = edit_distance_ops(&state, reference);
        return TerEdits {
            insertions: ins,
            deletions: del,
            substitutions: sub,
            shifts,
        };
    }
    let mut current: Vec<&str> = hyp.to_vec();
    let mut shifts = 0u64;
    if allow_shifts {
        let mut base = edit_distance(&current, reference);
        loop {
            let mut best: Option<(u64, usize, usize, usize)> = None;
            let n = current.len();
            for start in 0..n {
                for len in 1..=MAX_SHIFT_SIZE.min(n - start) {
                    for dest in 0..=(n - len) {
                        if dest == start {
                            continue;
                        }
                        if start.abs_diff(dest) > MAX_SHIFT_DIST {
                            continue;
                        }
                        let candidate = shifted(&current, start, len, dest);
                        let d = edit_distance(&candidate, reference);
                        if d < base && best.map(|(bd, ..)| d < bd).unwrap_or(true) {
                            best = Some((d, start, len, dest));
                        }
                    }
                }
            }
            let Some((d, start, len, dest)) = best else {
                break;
            };
            current = shifted(&current, start, len, dest);
            shifts += 1;
            base = d;
        }
    }
    let (ins, del, sub) = edit_distance_ops(&current, reference);
    TerEdits {
        insertions: ins,
        deletions: del,
        substitutions: sub,
        shifts,
    }
}

/// TER against the closest (minimum-edit) reference per segment; corpus TER
/// is total edits over total chosen reference lengths.
pub fn ter(hyp: &Document, refs: &[Document]) -> Result<ScoreReport, MetricError> {
    validate(hyp, refs)?;
    for (ri, r) in refs.iter().enumerate() {
        if let Some(si) = r.sentences.iter().position(|s| s.is_empty()) {
            return Err(MetricError::ZeroLengthReference {
                ref_index: ri,
                segment: si,
            });
        }
    }

    let per: Vec<(TerEdits, u64)> = hyp
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, sentence)| {
            let hyp_tokens = sentence.surfaces();
            refs.iter()
                .map(|r| {
                    let ref_tokens = r.sentences[i].surfaces();
                    let edits = ter_edits(&hyp_tokens, &ref_tokens, true);
                    (edits, ref_tokens.len() as u64)
                })
                .min_by_key(|(edits, ref_len)| (edits.total(), *ref_len))
                .expect("at least one reference")
        })
        .collect();

    let mut totals = TerEdits::default();
    let mut ref_length = 0u64;
    let mut per_segment = Vec::with_capacity(per.len());
    for (edits, ref_len) in &per {
        totals.insertions += edits.insertions;
        totals.deletions += edits.deletions;
        totals.substitutions += edits.substitutions;
        totals.shifts += edits.shifts;
        ref_length += ref_len;
        per_segment.push(edits.total() as f64 / *ref_len as f64);
    }
    let corpus_score = totals.total() as f64 / ref_length as f64;

    Ok(ScoreReport {
        metric: Metric::Ter,
        corpus_score,
        per_segment,
        components: Components::Ter(TerComponents {
            insertions: totals.insertions,
            deletions: totals.deletions,
            substitutions: totals.substitutions,
            shifts: totals.shifts,
            total_edits: totals.total(),
            ref_length,
            variant: format!(
                "exact shift search up to {EXACT_SHIFT_LIMIT} tokens, greedy shifts beyond \
                 (span <= {MAX_SHIFT_SIZE}, distance <= {MAX_SHIFT_DIST}), \
                 closest reference by edits"
            ),
        }),
    })
}
