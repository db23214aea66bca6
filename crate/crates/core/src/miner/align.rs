//! Optimal monotone sentence alignment between two documents. The objective
//! is the summed pair similarity minus a per-skipped-sentence gap penalty;
//! the optimum is found by A* over the alignment grid instead of filling
//! the full dynamic-programming table, because similarity evaluation is the
//! expensive part. Similarities are computed lazily and memoized.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::corpus::{BiSegment, Document};
use crate::miner::dictionary::ProbDictionary;
use crate::miner::features::featurize;
use crate::miner::SimilarityModel;

/// One aligned sentence pair: indices into the two documents plus the
/// similarity that pairing earned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair {
    pub i: usize,
    pub j: usize,
    pub sim: f64,
}

/// A strictly monotone one-to-one alignment: i and j both strictly increase
/// along `pairs` (no crossings, no many-to-one).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
}

impl Alignment {
    pub fn total_score(&self, len_a: usize, len_b: usize, gap_penalty: f64) -> f64 {
        let sim_sum: f64 = self.pairs.iter().map(|p| p.sim).sum();
        let skipped = (len_a - self.pairs.len()) + (len_b - self.pairs.len());
        sim_sum - gap_penalty * skipped as f64
    }
}

/// Search counters: `sim_calls` is the number of distinct pairs whose
/// similarity was actually evaluated.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlignStats {
    pub sim_calls: usize,
    pub nodes_expanded: usize,
    pub total_score: f64,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    f: f64,
    depth: usize,
    i: usize,
    j: usize,
    g: f64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Higher f first; among equals prefer nodes closer to the goal so
        // the diagonal is carried through without detours. The final
        // components make the order total, hence deterministic.
        self.f
            .total_cmp(&other.f)
            .then_with(|| self.depth.cmp(&other.depth))
            .then_with(|| other.i.cmp(&self.i))
            .then_with(|| other.j.cmp(&self.j))
    }
}

/// Align two index ranges with a caller-supplied similarity. A* on nodes
/// (i, j): the diagonal edge pairs sentence i with j at weight sim(i, j),
/// gap edges skip one sentence at weight -gap_penalty. The heuristic
/// min(|A|-i, |B|-j) * 1.0 assumes every remaining pair could score the
/// upper bound 1 at no gap cost, so it never underestimates and the first
/// goal expansion is optimal - identical to the full dynamic program.
pub fn align_with(
    len_a: usize,
    len_b: usize,
    gap_penalty: f64,
    mut similarity: impl FnMut(usize, usize) -> f64,
) -> (Alignment, AlignStats) {
    assert!(gap_penalty >= 0.0, "gap penalty must be non-negative");
    let mut stats = AlignStats::default();
    if len_a == 0 || len_b == 0 {
        stats.total_score = -gap_penalty * (len_a + len_b) as f64;
        return (Alignment::default(), stats);
    }

    let h = |i: usize, j: usize| (len_a - i).min(len_b - j) as f64;
    let mut sim_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut best_g: HashMap<(usize, usize), f64> = HashMap::new();
    let mut parent: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut heap = BinaryHeap::new();

    best_g.insert((0, 0), 0.0);
    heap.push(HeapEntry {
        f: h(0, 0),
        depth: 0,
        i: 0,
        j: 0,
        g: 0.0,
    });

    let goal = (len_a, len_b);
    let mut goal_g = f64::NEG_INFINITY;
    while let Some(entry) = heap.pop() {
        let node = (entry.i, entry.j);
        if best_g.get(&node).copied().unwrap_or(f64::NEG_INFINITY) > entry.g {
            continue;
        }
        if node == goal {
            goal_g = entry.g;
            break;
        }
        stats.nodes_expanded += 1;
        let (i, j) = node;
        let mut successors: [Option<((usize, usize), f64)>; 3] = [None, None, None];
        if i < len_a && j < len_b {
            let sim = *sim_cache.entry((i, j)).or_insert_with(|| {
                stats.sim_calls += 1;
                similarity(i, j)
            });
            successors[0] = Some(((i + 1, j + 1), sim));
        }
        if i < len_a {
            successors[1] = Some(((i + 1, j), -gap_penalty));
        }
        if j < len_b {
            successors[2] = Some(((i, j + 1), -gap_penalty));
        }
        for succ in successors.into_iter().flatten() {
            let ((ni, nj), weight) = succ;
            let g = entry.g + weight;
            if g > best_g.get(&(ni, nj)).copied().unwrap_or(f64::NEG_INFINITY) {
                best_g.insert((ni, nj), g);
                parent.insert((ni, nj), node);
                heap.push(HeapEntry {
                    f: g + h(ni, nj),
                    depth: ni + nj,
                    i: ni,
                    j: nj,
                    g,
                });
            }
        }
    }

    // Backtrace the optimal path; diagonal steps are the aligned pairs.
    let mut pairs = Vec::new();
    let mut node = goal;
    while node != (0, 0) {
        let prev = parent[&node];
        if node.0 == prev.0 + 1 && node.1 == prev.1 + 1 {
            pairs.push(AlignedPair {
                i: prev.0,
                j: prev.1,
                sim: sim_cache[&(prev.0, prev.1)],
            });
        }
        node = prev;
    }
    pairs.reverse();
    stats.total_score = goal_g;
    (Alignment { pairs }, stats)
}

fn model_similarity<'a>(
    a: &'a Document,
    b: &'a Document,
    model: &'a SimilarityModel,
    dict: &'a ProbDictionary,
) -> impl FnMut(usize, usize) -> f64 + 'a {
    let len_a = a.len().max(1) as f64;
    let len_b = b.len().max(1) as f64;
    move |i: usize, j: usize| {
        let f = featurize(
            &a.sentences[i],
            &b.sentences[j],
            dict,
            i as f64 / len_a,
            j as f64 / len_b,
        );
        model.likelihood(&f)
    }
}

/// Align two documents with the trained similarity model.
pub fn align(
    a: &Document,
    b: &Document,
    model: &SimilarityModel,
    dict: &ProbDictionary,
    gap_penalty: f64,
) -> Alignment {
    align_with(a.len(), b.len(), gap_penalty, model_similarity(a, b, model, dict)).0
}

/// Align, then keep only pairs whose similarity clears the threshold. The
/// surviving pairs carry their similarity as the segment score.
pub fn mine(
    a: &Document,
    b: &Document,
    model: &SimilarityModel,
    dict: &ProbDictionary,
    threshold: f64,
    gap_penalty: f64,
) -> Vec<BiSegment> {
    assert!((0.0..=1.0).contains(&threshold), "threshold must lie in [0,1]");
    let alignment = align(a, b, model, dict, gap_penalty);
    alignment
        .pairs
        .iter()
        .filter(|p| p.sim >= threshold)
        .map(|p| {
            BiSegment::scored(
                a.sentences[p.i].clone(),
                b.sentences[p.j].clone(),
                p.sim.clamp(0.0, 1.0),
            )
        })
        .collect()
}

/// Filter an existing alignment by threshold; used when the caller wants
/// both the full alignment and the mined subset.
pub fn filter_alignment(alignment: &Alignment, threshold: f64) -> Vec<AlignedPair> {
    alignment
        .pairs
        .iter()
        .copied()
        .filter(|p| p.sim >= threshold)
        .collect()
}

/// Mine a batch of document pairs across the worker pool. Pairs are
/// independent, so the output equals concatenating per-pair results in
/// input order.
pub fn mine_documents(
    pairs: &[(Document, Document)],
    model: &SimilarityModel,
    dict: &ProbDictionary,
    threshold: f64,
    gap_penalty: f64,
) -> Vec<BiSegment> {
    use rayon::prelude::*;
    pairs
        .par_iter()
        .map(|(a, b)| mine(a, b, model, dict, threshold, gap_penalty))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive enumeration over every monotone alignment, replaying the
    /// same path-order accumulation the search uses.
    pub(crate) fn enumerate_best(
        len_a: usize,
        len_b: usize,
        gap: f64,
        sim: &dyn Fn(usize, usize) -> f64,
    ) -> f64 {
        fn recurse(
            i: usize,
            j: usize,
            len_a: usize,
            len_b: usize,
            gap: f64,
            sim: &dyn Fn(usize, usize) -> f64,
            acc: f64,
        ) -> f64 {
            if i == len_a && j == len_b {
                return acc;
            }
            let mut best = f64::NEG_INFINITY;
            if i < len_a && j < len_b {
                best = best.max(recurse(i + 1, j + 1, len_a, len_b, gap, sim, acc + sim(i, j)));
            }
            if i < len_a {
                best = best.max(recurse(i + 1, j, len_a, len_b, gap, sim, acc - gap));
            }
            if j < len_b {
                best = best.max(recurse(i, j + 1, len_a, len_b, gap, sim, acc - gap));
            }
            best
        }
        recurse(0, 0, len_a, len_b, gap, sim, 0.0)
    }

    #[test]
    fn identical_documents_align_on_the_diagonal() {
        let sim = |i: usize, j: usize| if i == j { 1.0 } else { 0.1 };
        let (alignment, _) = align_with(3, 3, 0.3, sim);
        let indices: Vec<(usize, usize)> = alignment.pairs.iter().map(|p| (p.i, p.j)).collect();
        assert_eq!(indices, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(alignment.pairs.iter().all(|p| p.sim == 1.0));
    }

    #[test]
    fn inserted_sentence_is_skipped() {
        // B = A with one extra sentence inserted at position 1.
        let sim = |i: usize, j: usize| {
            let mapping = [(0usize, 0usize), (1, 2), (2, 3)];
            if mapping.contains(&(i, j)) {
                1.0
            } else {
                0.05
            }
        };
        let (alignment, _) = align_with(3, 4, 0.49, sim);
        let indices: Vec<(usize, usize)> = alignment.pairs.iter().map(|p| (p.i, p.j)).collect();
        assert_eq!(indices, vec![(0, 0), (1, 2), (2, 3)]);
    }

    #[test]
    fn empty_documents_give_empty_alignment() {
        let (alignment, stats) = align_with(0, 0, 0.49, |_, _| 1.0);
        assert!(alignment.pairs.is_empty());
        assert_eq!(stats.sim_calls, 0);
        let (alignment, _) = align_with(0, 5, 0.49, |_, _| 1.0);
        assert!(alignment.pairs.is_empty());
    }

    #[test]
    fn diagonal_dominant_case_stays_lazy() {
        let mut calls = 0usize;
        let (alignment, stats) = align_with(10, 10, 0.49, |i, j| {
            calls += 1;
            if i == j {
                1.0
            } else {
                0.1
            }
        });
        assert_eq!(alignment.pairs.len(), 10);
        assert_eq!(stats.sim_calls, calls);
        assert!(
            stats.sim_calls < 100,
            "expected < 100 similarity calls, got {}",
            stats.sim_calls
        );
    }

    #[test]
    fn score_matches_enumeration_on_small_grids() {
        // Dyadic similarity values make every partial sum exact, so the
        // comparison below is legitimately ==.
        let table = |i: usize, j: usize| ((i * 7 + j * 13) % 97) as f64 / 128.0;
        for (la, lb) in [(2usize, 3usize), (3, 3), (4, 2), (5, 5)] {
            let (alignment, stats) = align_with(la, lb, 0.25, table);
            let oracle = enumerate_best(la, lb, 0.25, &table);
            assert_eq!(stats.total_score, oracle, "grid {la}x{lb}");
            assert_eq!(
                alignment.total_score(la, lb, 0.25),
                stats.total_score
            );
        }
    }

    proptest! {
        #[test]
        fn alignment_is_strictly_monotone(
            len_a in 0usize..7,
            len_b in 0usize..7,
            seed in 0u64..500,
            gap_steps in 0u32..4
        ) {
            let sim = move |i: usize, j: usize| {
                let x = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add((i * 31 + j) as u64);
                ((x >> 33) % 1024) as f64 / 1024.0
            };
            let gap = gap_steps as f64 * 0.25;
            let (alignment, stats) = align_with(len_a, len_b, gap, sim);
            for w in alignment.pairs.windows(2) {
                prop_assert!(w[0].i < w[1].i);
                prop_assert!(w[0].j < w[1].j);
            }
            let oracle = enumerate_best(len_a, len_b, gap, &sim);
            prop_assert_eq!(stats.total_score, oracle);
        }
    }
}
