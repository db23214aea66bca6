//! Detection and repair of the corruption patterns found in crawled and
//! re-aligned corpora: whole-sentence duplication inside one segment,
//! adjacent duplicated phrases, and overlong segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BiSegment, ParallelCorpus, Sentence, Token};

/// Corruption pattern classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// The whole token sequence is two copies of a complete sentence
    /// (the duplicated half ends in terminal punctuation).
    WholeSentenceDup,
    /// The token sequence is two copies of the same half, but the half is
    /// not a complete sentence.
    HalfDup,
    /// A contiguous token run immediately repeated inside the sentence.
    InternalPhraseDup,
    /// One side exceeds the length limit.
    Overlong,
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::WholeSentenceDup => "whole_sentence_dup",
            Pattern::HalfDup => "half_dup",
            Pattern::InternalPhraseDup => "internal_phrase_dup",
            Pattern::Overlong => "overlong",
        }
    }
}

/// What the cleaner did about a detected pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Repaired,
    Dropped,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Repaired => "repair",
            Action::Dropped => "drop",
        }
    }
}

/// One detected corruption: where it sits, what it is, and the repaired form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionReport {
    pub segment_index: usize,
    pub pattern: Pattern,
    /// Token index range of the offending span in the original sentence
    /// (for duplications: the removed second copy).
    pub span: std::ops::Range<usize>,
    pub repaired: Sentence,
    pub action: Action,
}

/// Which side of a segment detectors run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
    Both,
}

/// Cleaning configuration. Defaults mirror the pipeline this grew out of:
/// repair duplications on the source (Polish) side only, drop segments
/// longer than 80 tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanOptions {
    pub whole_dup: bool,
    pub internal_dup: bool,
    pub overlong: bool,
    pub side: Side,
    /// Minimum duplicated-run length for internal duplication, in tokens.
    pub min_dup_len: usize,
    /// Length limit for the overlong filter, in tokens.
    pub max_len: usize,
    /// Repair duplications in place, or drop the whole segment.
    pub dup_action: Action,
    /// Upper bound on fixpoint passes per sentence.
    pub max_passes: usize,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            whole_dup: true,
            internal_dup: true,
            overlong: true,
            side: Side::Source,
            min_dup_len: 3,
            max_len: 80,
            dup_action: Action::Repaired,
            max_passes: 10,
        }
    }
}

/// Corpus-level cleaning outcome: insertion-error and overlong ratios are
/// reported against both segment and token denominators, since either
/// reading of "percent of errors" is defensible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanSummary {
    pub segments_in: usize,
    pub segments_out: usize,
    pub segments_affected: usize,
    pub segments_dropped: usize,
    pub tokens_in: usize,
    pub tokens_removed: usize,
    /// affected segments / total segments
    pub affected_segment_ratio: f64,
    /// removed tokens / total tokens
    pub removed_token_ratio: f64,
}

fn tokens_equal(a: &[Token], b: &[Token]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.surface == y.surface)
}

fn is_terminal_punct(token: &Token) -> bool {
    matches!(token.surface.as_str(), "." | "!" | "?")
}

fn sentence_without(s: &Sentence, span: &std::ops::Range<usize>) -> Sentence {
    let mut tokens = Vec::with_capacity(s.tokens.len() - span.len());
    tokens.extend_from_slice(&s.tokens[..span.start]);
    tokens.extend_from_slice(&s.tokens[span.end..]);
    Sentence::from_tokens(tokens)
}

/// Detect a sentence whose token sequence is exactly two consecutive copies
/// of the same half. Returns the repair keeping the first half; the span is
/// the removed second half. Comparison is case-sensitive and exact.
pub fn detect_whole_dup(s: &Sentence) -> Option<CorruptionReport> {
    let n = s.tokens.len();
    if n == 0 || !n.is_multiple_of(2) {
        return None;
    }
    let half = n / 2;
    if !tokens_equal(&s.tokens[..half], &s.tokens[half..]) {
        return None;
    }
    let span = half..n;
    let repaired = sentence_without(s, &span);
    let pattern = if is_terminal_punct(&s.tokens[half - 1]) {
        Pattern::WholeSentenceDup
    } else {
        Pattern::HalfDup
    };
    Some(CorruptionReport {
        segment_index: 0,
        pattern,
        span,
        repaired,
        action: Action::Repaired,
    })
}

/// Detect the longest contiguous token run of length >= `min_len` that is
/// immediately followed by an identical run. Ties between maximal runs go to
/// the leftmost. The repair deletes the second copy. Repeated application
/// (see [`clean_corpus`]) also resolves chains like "A A B B".
pub fn detect_internal_dup(s: &Sentence, min_len: usize) -> Option<CorruptionReport> {
    let min_len = min_len.max(2);
    let n = s.tokens.len();
    if n < 2 * min_len {
        return None;
    }
    let max_run = n / 2;
    for len in (min_len..=max_run).rev() {
        for start in 0..=(n - 2 * len) {
            if tokens_equal(
                &s.tokens[start..start + len],
                &s.tokens[start + len..start + 2 * len],
            ) {
                let span = (start + len)..(start + 2 * len);
                let repaired = sentence_without(s, &span);
                return Some(CorruptionReport {
                    segment_index: 0,
                    pattern: Pattern::InternalPhraseDup,
                    span,
                    repaired,
                    action: Action::Repaired,
                });
            }
        }
    }
    None
}

/// Drop every segment where either side exceeds `max_len` tokens.
/// Survivor order is preserved; the dropped count is returned alongside.
pub fn length_filter(corpus: &ParallelCorpus, max_len: usize) -> (ParallelCorpus, usize) {
    assert!(max_len > 0, "max_len must be positive");
    let survivors: Vec<BiSegment> = corpus
        .segments
        .iter()
        .filter(|seg| seg.source.len() <= max_len && seg.target.len() <= max_len)
        .cloned()
        .collect();
    let dropped = corpus.len() - survivors.len();
    (
        ParallelCorpus::new(survivors, &corpus.source_lang, &corpus.target_lang),
        dropped,
    )
}

enum SentenceOutcome {
    Clean(Sentence, Vec<CorruptionReport>),
    Drop(Vec<CorruptionReport>),
}

/// Run the duplication detectors on one sentence until fixpoint.
fn clean_sentence(sentence: &Sentence, opts: &CleanOptions) -> SentenceOutcome {
    let mut current = sentence.clone();
    let mut reports = Vec::new();
    for _ in 0..opts.max_passes {
        let found = if opts.whole_dup {
            detect_whole_dup(&current)
        } else {
            None
        }
        .or_else(|| {
            if opts.internal_dup {
                detect_internal_dup(&current, opts.min_dup_len)
            } else {
                None
            }
        });
        let Some(mut report) = found else { break };
        if opts.dup_action == Action::Dropped {
            report.action = Action::Dropped;
            reports.push(report);
            return SentenceOutcome::Drop(reports);
        }
        if report.repaired.is_empty() {
            // A repair must never erase a sentence; drop the segment instead.
            report.action = Action::Dropped;
            reports.push(report);
            return SentenceOutcome::Drop(reports);
        }
        current = report.repaired.clone();
        reports.push(report);
    }
    SentenceOutcome::Clean(current, reports)
}

/// Clean a parallel corpus: apply the configured detectors per segment until
/// fixpoint, then the overlong filter. Returns the cleaned corpus plus one
/// report per action taken. Cleaning a clean corpus is a no-op.
pub fn clean_corpus(
    corpus: &ParallelCorpus,
    opts: &CleanOptions,
) -> (ParallelCorpus, Vec<CorruptionReport>, CleanSummary) {
    let tokens_in: usize = corpus
        .segments
        .iter()
        .map(|s| s.source.len() + s.target.len())
        .sum();

    let per_segment: Vec<(Option<BiSegment>, Vec<CorruptionReport>)> = corpus
        .segments
        .par_iter()
        .enumerate()
        .map(|(idx, seg)| {
            let mut reports = Vec::new();
            let mut dropped = false;

            let mut source = seg.source.clone();
            let mut target = seg.target.clone();
            if matches!(opts.side, Side::Source | Side::Both) {
                match clean_sentence(&source, opts) {
                    SentenceOutcome::Clean(s, mut r) => {
                        source = s;
                        reports.append(&mut r);
                    }
                    SentenceOutcome::Drop(mut r) => {
                        reports.append(&mut r);
                        dropped = true;
                    }
                }
            }
            if !dropped && matches!(opts.side, Side::Target | Side::Both) {
                match clean_sentence(&target, opts) {
                    SentenceOutcome::Clean(s, mut r) => {
                        target = s;
                        reports.append(&mut r);
                    }
                    SentenceOutcome::Drop(mut r) => {
                        reports.append(&mut r);
                        dropped = true;
                    }
                }
            }
            if !dropped
                && opts.overlong
                && (source.len() > opts.max_len || target.len() > opts.max_len)
            {
                let long_side = if source.len() > opts.max_len {
                    &source
                } else {
                    &target
                };
                reports.push(CorruptionReport {
                    segment_index: idx,
                    pattern: Pattern::Overlong,
                    span: 0..long_side.len(),
                    repaired: long_side.clone(),
                    action: Action::Dropped,
                });
                dropped = true;
            }
            for r in &mut reports {
                r.segment_index = idx;
            }
            if dropped {
                (None, reports)
            } else {
                (
                    Some(BiSegment {
                        source,
                        target,
                        score: seg.score,
                    }),
                    reports,
                )
            }
        })
        .collect();

    let mut segments = Vec::with_capacity(corpus.len());
    let mut reports = Vec::new();
    let mut segments_affected = 0usize;
    let mut segments_dropped = 0usize;
    for (seg, mut segment_reports) in per_segment {
        if !segment_reports.is_empty() {
            segments_affected += 1;
        }
        match seg {
            Some(seg) => segments.push(seg),
            None => segments_dropped += 1,
        }
        reports.append(&mut segment_reports);
    }

    let cleaned = ParallelCorpus::new(segments, &corpus.source_lang, &corpus.target_lang);
    let tokens_out: usize = cleaned
        .segments
        .iter()
        .map(|s| s.source.len() + s.target.len())
        .sum();
    let summary = CleanSummary {
        segments_in: corpus.len(),
        segments_out: cleaned.len(),
        segments_affected,
        segments_dropped,
        tokens_in,
        tokens_removed: tokens_in - tokens_out,
        affected_segment_ratio: if corpus.is_empty() {
            0.0
        } else {
            segments_affected as f64 / corpus.len() as f64
        },
        removed_token_ratio: if tokens_in == 0 {
            0.0
        } else {
            (tokens_in - tokens_out) as f64 / tokens_in as f64
        },
    };
    (cleaned, reports, summary)
}

/// Render reports as the TSV the CLI writes:
/// segment_index, pattern, span_start, span_end, action.
pub fn reports_to_tsv(reports: &[CorruptionReport]) -> String {
    let mut out = String::from("segment_index\tpattern\tspan_start\tspan_end\taction\n");
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.segment_index,
            r.pattern.as_str(),
            r.span.start,
            r.span.end,
            r.action.as_str()
        ));
    }
    out
}
