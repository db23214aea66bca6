//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (run with `cargo test --test acceptance -- --nocapture` to
//! see them). Expected values come from independent oracles or hand
//! evaluation, never from the implementation under test.

mod common;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use common::{OracleLm, OracleSmoothing, TinyCorpusGen};
use forge_core::cleaner::{clean_corpus, CleanOptions, Pattern};
use forge_core::corpus::{tokenize, BiSegment, Document, ParallelCorpus, Sentence, Token};
use forge_core::lm::{read_arpa, write_arpa, NGramModel, Smoothing};
use forge_core::metrics::{bleu, meteor, nist, ter, ter_edits, Components};
use forge_core::miner::{align_with, featurize, train_classifier, ProbDictionary, SimilarityModel};
use forge_core::pipeline::{manifest_path_for, run_recipe};
use forge_core::restorer::restore;
use forge_core::selector::{
    mml_score, select, train_selection_models, SelectionConfig, SelectionModels,
};

fn pass(criterion: usize, started: Instant, what: &str) {
    println!(
        "ACCEPTANCE {criterion:02} PASS ({} ms): {what}",
        started.elapsed().as_millis()
    );
}

fn doc(lines: &[&str]) -> Document {
    Document::new("d", lines.iter().map(|l| tokenize(l)).collect())
}

fn words_doc(sentences: &[Vec<String>]) -> Document {
    Document::new(
        "d",
        sentences
            .iter()
            .map(|s| Sentence::from_tokens(s.iter().map(Token::new).collect()))
            .collect(),
    )
}

// --- Criterion 1: cleaner golden tests -----------------------------------

#[test]
fn acceptance_01_cleaner_golden() {
    let started = Instant::now();
    let whole = "Zakumulują się u tych najbardziej pijanych i skąpych. \
                 Zakumulują się u tych najbardziej pijanych i skąpych.";
    let internal = "Matka może się ponownie rozmnażać, ale jak wysoką cenę płaci, \
                    przez akumulację toksyn w swoim organizmie - \
                    przez akumulację toksyn w swoim organizmie - śmierć pierwszego młodego.";
    let corpus = ParallelCorpus::new(
        vec![
            BiSegment::new(tokenize(whole), tokenize("target one")),
            BiSegment::new(tokenize(internal), tokenize("target two")),
        ],
        "pl",
        "en",
    );
    let (cleaned, reports, _) = clean_corpus(&corpus, &CleanOptions::default());
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].pattern, Pattern::WholeSentenceDup);
    assert_eq!(reports[1].pattern, Pattern::InternalPhraseDup);
    assert_eq!(
        cleaned.segments[0].source.detokenized(),
        "Zakumulują się u tych najbardziej pijanych i skąpych ."
    );
    assert_eq!(
        cleaned.segments[1].source.detokenized(),
        "Matka może się ponownie rozmnażać , ale jak wysoką cenę płaci , \
         przez akumulację toksyn w swoim organizmie - śmierć pierwszego młodego ."
    );
    let (again, more_reports, _) = clean_corpus(&cleaned, &CleanOptions::default());
    assert_eq!(again, cleaned);
    assert!(more_reports.is_empty());
    assert!(started.elapsed() < Duration::from_secs(1), "exceeded 1 s");
    pass(1, started, "paper corruption examples repaired, cleaning idempotent");
}

// --- Criterion 2: LM normalization on random corpora ---------------------

#[test]
fn acceptance_02_lm_normalization() {
    let started = Instant::now();
    let mut gen = TinyCorpusGen::new(20_240_201);
    let mut models_checked = 0usize;
    for _ in 0..100 {
        let vocab_size = gen.below(20) + 1;
        let sentences = gen.below(200) + 1;
        let corpus = gen.corpus(vocab_size, sentences, 10);
        let document = words_doc(&corpus);
        for smoothing in [Smoothing::KneserNeyInterpolated, Smoothing::WittenBell] {
            for order in 1..=3 {
                let model = NGramModel::train(&document, order, smoothing).unwrap();
                let vocab = model.predicted_vocab();
                for context in model.observed_contexts() {
                    let ctx: Vec<&str> = context.iter().map(|s| s.as_str()).collect();
                    let total: f64 = vocab.iter().map(|w| model.word_prob(&ctx, w)).sum();
                    assert!(
                        (total - 1.0).abs() <= 1e-9,
                        "{smoothing:?} order {order} context {context:?}: sum {total}"
                    );
                }
                models_checked += 1;
            }
        }
    }
    assert_eq!(models_checked, 600);
    assert!(started.elapsed() < Duration::from_secs(30), "exceeded 30 s");
    pass(2, started, "600 models normalized to 1e-9 over every observed context");
}

// --- Criterion 3: LM oracle equivalence ----------------------------------

fn check_lm_against_oracle(sentences: &[Vec<String>], order: usize) {
    let document = words_doc(sentences);
    for (smoothing, oracle_smoothing) in [
        (Smoothing::KneserNeyInterpolated, OracleSmoothing::KneserNey),
        (Smoothing::WittenBell, OracleSmoothing::WittenBell),
    ] {
        let model = NGramModel::train(&document, order, smoothing).unwrap();
        let oracle = OracleLm::build(sentences, order, oracle_smoothing);
        let mut vocab: Vec<&str> = oracle.predicted_vocab().iter().map(|s| s.as_str()).collect();
        vocab.push("unseen-token");
        let mut contexts: Vec<Vec<&str>> = vec![Vec::new()];
        if order >= 2 {
            contexts.extend(vocab.iter().map(|&a| vec![a]));
        }
        if order >= 3 {
            for &a in &vocab {
                for &b in &vocab {
                    contexts.push(vec![a, b]);
                }
            }
        }
        for context in &contexts {
            for &word in &vocab {
                let got = model.word_prob(context, word);
                let want = oracle.prob(context, word);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1e-300),
                    "{smoothing:?} order {order}: P({word}|{context:?}) = {got}, oracle {want}"
                );
            }
        }
    }
}

#[test]
fn acceptance_03_lm_oracle_equivalence() {
    let started = Instant::now();
    let fixed: Vec<Vec<String>> =
        vec!["a b a b a".split_whitespace().map(String::from).collect()];
    for order in 1..=3 {
        check_lm_against_oracle(&fixed, order);
    }
    let mut gen = TinyCorpusGen::new(31_337);
    for _ in 0..20 {
        let vocab_size = gen.below(4) + 1;
        let sentences = gen.below(8) + 1;
        let corpus = gen.corpus(vocab_size, sentences, 6);
        for order in 1..=3 {
            check_lm_against_oracle(&corpus, order);
        }
    }
    pass(3, started, "KN and WB probabilities match brute-force formulas to 1e-12");
}

// --- Criterion 4: ARPA round-trip ----------------------------------------

#[test]
fn acceptance_04_arpa_round_trip() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut gen = TinyCorpusGen::new(44);
    for case in 0..6 {
        let vocab_size = gen.below(8) + 2;
        let sentence_count = gen.below(20) + 2;
        let train = gen.corpus(vocab_size, sentence_count, 8);
        let eval = gen.corpus(vocab_size + 2, 5, 6);
        let train_doc = words_doc(&train);
        for (tag, smoothing) in [
            ("kn", Smoothing::KneserNeyInterpolated),
            ("wb", Smoothing::WittenBell),
        ] {
            for order in 1..=3 {
                let model = NGramModel::train(&train_doc, order, smoothing).unwrap();
                let path = dir.path().join(format!("{case}_{tag}_{order}.arpa"));
                write_arpa(&model, &path).unwrap();
                let loaded = read_arpa(&path).unwrap();
                let before = model.perplexity(&words_doc(&eval)).unwrap().ppl;
                let after = loaded.perplexity(&words_doc(&eval)).unwrap().ppl;
                assert!(
                    ((before - after) / before).abs() <= 1e-6,
                    "{tag} order {order}: {before} vs {after}"
                );
            }
        }
        // Unsmoothed models round-trip on fully covered evaluation text.
        let model = NGramModel::train(&train_doc, 2, Smoothing::NoneMle).unwrap();
        let path = dir.path().join(format!("{case}_mle.arpa"));
        write_arpa(&model, &path).unwrap();
        let loaded = read_arpa(&path).unwrap();
        let before = model.perplexity(&train_doc).unwrap().ppl;
        let after = loaded.perplexity(&train_doc).unwrap().ppl;
        assert!(((before - after) / before).abs() <= 1e-6);
    }
    pass(4, started, "write->read preserves perplexity to 1e-6 relative");
}

// --- Criterion 5: aligner optimality -------------------------------------

/// Exhaustive monotone-alignment maximum, accumulating along the path in
/// the same order as the search so dyadic scores compare exactly.
fn enumerate_best(len_a: usize, len_b: usize, gap: f64, sim: &dyn Fn(usize, usize) -> f64) -> f64 {
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
fn acceptance_05_aligner_optimality() {
    let started = Instant::now();
    let mut gen = TinyCorpusGen::new(555);
    for instance in 0..500 {
        let len_a = gen.below(9);
        let len_b = gen.below(9);
        // Dyadic similarities and gaps keep every partial sum exact in f64,
        // so the equality below is meaningful.
        let seed = gen.next_u64();
        let sim = move |i: usize, j: usize| {
            let mut x = seed ^ ((i as u64) << 32) ^ (j as u64);
            x ^= x >> 33;
            x = x.wrapping_mul(0xFF51AFD7ED558CCD);
            x ^= x >> 33;
            ((x % 1025) as f64) / 1024.0
        };
        let gap = (gen.below(512) as f64) / 1024.0;
        let (_, stats) = align_with(len_a, len_b, gap, sim);
        let oracle = enumerate_best(len_a, len_b, gap, &sim);
        assert_eq!(
            stats.total_score, oracle,
            "instance {instance}: {len_a}x{len_b} gap {gap}"
        );
    }
    assert!(started.elapsed() < Duration::from_secs(60), "exceeded 60 s");
    pass(5, started, "A* total score equals exhaustive enumeration on 500 instances");
}

// --- Criterion 6: aligner laziness ----------------------------------------

#[test]
fn acceptance_06_aligner_laziness() {
    let started = Instant::now();
    let (alignment, stats) = align_with(10, 10, 0.49, |i, j| if i == j { 1.0 } else { 0.1 });
    assert_eq!(alignment.pairs.len(), 10);
    assert!(
        stats.sim_calls < 100,
        "similarity called {} times, expected < 100",
        stats.sim_calls
    );
    pass(
        6,
        started,
        "diagonal case evaluated fewer than N*M similarities",
    );
}

// --- Criterion 7: metric fixtures -----------------------------------------

fn levenshtein(a: &[&str], b: &[&str]) -> u64 {
    let mut prev: Vec<u64> = (0..=b.len() as u64).collect();
    let mut cur = vec![0u64; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i as u64;
        for j in 1..=b.len() {
            cur[j] = (prev[j - 1] + u64::from(a[i - 1] != b[j - 1]))
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// True minimum shifts-plus-edits by breadth-first search over shift
/// sequences, pruned once a whole level cannot beat the best found.
fn exhaustive_ter(hyp: &[&str], reference: &[&str]) -> u64 {
    let hyp_vec: Vec<String> = hyp.iter().map(|s| s.to_string()).collect();
    let lev = |state: &[String]| -> u64 {
        let refs: Vec<&str> = reference.to_vec();
        let toks: Vec<&str> = state.iter().map(|s| s.as_str()).collect();
        levenshtein(&toks, &refs)
    };
    let mut best = lev(&hyp_vec);
    let mut frontier = vec![hyp_vec.clone()];
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    seen.insert(hyp_vec);
    let mut depth = 0u64;
    while !frontier.is_empty() && depth + 1 < best {
        depth += 1;
        let mut next = Vec::new();
        for state in frontier {
            let n = state.len();
            for start in 0..n {
                for len in 1..=(n - start) {
                    for dest in 0..=(n - len) {
                        if dest == start {
                            continue;
                        }
                        let mut rest: Vec<String> = Vec::with_capacity(n - len);
                        rest.extend_from_slice(&state[..start]);
                        rest.extend_from_slice(&state[start + len..]);
                        let mut cand: Vec<String> = Vec::with_capacity(n);
                        cand.extend_from_slice(&rest[..dest]);
                        cand.extend_from_slice(&state[start..start + len]);
                        cand.extend_from_slice(&rest[dest..]);
                        if seen.insert(cand.clone()) {
                            best = best.min(depth + lev(&cand));
                            next.push(cand);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    best
}

#[test]
fn acceptance_07_metric_fixtures() {
    let started = Instant::now();
    let tol = 1e-9;

    // Identity: BLEU 1, TER 0, METEOR 1 - 0.5/m^3 for m = 4.
    let hyp = doc(&["w x y z"]);
    let refs = [hyp.clone()];
    assert!((bleu(&hyp, &refs, 4).unwrap().corpus_score - 1.0).abs() <= tol);
    assert!((ter(&hyp, &refs).unwrap().corpus_score - 0.0).abs() <= tol);
    assert!((meteor(&hyp, &refs).unwrap().corpus_score - 0.9921875).abs() <= tol);

    // Clipped unigram precision 1/4.
    let clipped = bleu(&doc(&["the the the the"]), &[doc(&["the cat"])], 4).unwrap();
    let Components::Bleu(c) = &clipped.components else {
        panic!()
    };
    assert!((c.precisions[0] - 0.25).abs() <= tol);

    // One block shift: TER 0.25.
    let shifted = ter(&doc(&["c d a b"]), &[doc(&["a b c d"])]).unwrap();
    assert!((shifted.corpus_score - 0.25).abs() <= tol);

    // NIST length penalty is exactly 0.5 at a 2/3 length ratio.
    let nist_report = nist(&doc(&["a b"]), &[doc(&["a b c"])], 5).unwrap();
    let Components::Nist(nc) = &nist_report.components else {
        panic!()
    };
    assert!((nc.brevity_penalty - 0.5).abs() <= tol);

    // Greedy shifts against the exhaustive oracle: never better than the
    // true optimum, and equal on every <= 8-token case we draw.
    let vocab = ["a", "b", "c", "d"];
    let mut gen = TinyCorpusGen::new(777);
    for _ in 0..150 {
        let hyp_tokens: Vec<&str> = (0..gen.below(8) + 1).map(|_| vocab[gen.below(4)]).collect();
        let ref_tokens: Vec<&str> = (0..gen.below(8) + 1).map(|_| vocab[gen.below(4)]).collect();
        let greedy = ter_edits(&hyp_tokens, &ref_tokens, true).total();
        let oracle = exhaustive_ter(&hyp_tokens, &ref_tokens);
        assert!(
            greedy >= oracle,
            "greedy {greedy} beat the oracle {oracle} on {hyp_tokens:?} vs {ref_tokens:?}"
        );
        assert_eq!(
            greedy, oracle,
            "greedy missed the optimum on {hyp_tokens:?} vs {ref_tokens:?}"
        );
    }
    pass(7, started, "metric fixtures at 1e-9; greedy TER equals the shift oracle");
}

// --- Criterion 8: TER/Levenshtein oracle ----------------------------------

#[test]
fn acceptance_08_ter_levenshtein_oracle() {
    let started = Instant::now();
    let vocab = ["a", "b", "c", "d", "e"];
    let mut gen = TinyCorpusGen::new(888);
    for _ in 0..1000 {
        let hyp: Vec<&str> = (0..gen.below(13)).map(|_| vocab[gen.below(5)]).collect();
        let reference: Vec<&str> = (0..gen.below(13)).map(|_| vocab[gen.below(5)]).collect();
        let edits = ter_edits(&hyp, &reference, false);
        assert_eq!(edits.shifts, 0);
        assert_eq!(
            edits.total(),
            levenshtein(&hyp, &reference),
            "hyp {hyp:?} vs ref {reference:?}"
        );
    }
    pass(8, started, "shift-free TER equals DP edit distance on 1000 random pairs");
}

// --- Criterion 9: selection semantics --------------------------------------

#[test]
fn acceptance_09_selection_semantics() {
    let started = Instant::now();

    // Exactly ceil(0.8 * 10) = 8 survivors.
    let pairs: Vec<BiSegment> = (0..10)
        .map(|i| {
            BiSegment::new(
                tokenize(&format!("zdanie {i}")),
                tokenize(&format!("sentence {i}")),
            )
        })
        .collect();
    let ten = ParallelCorpus::new(pairs, "pl", "en");
    let shared = NGramModel::train(&ten.source_document("d"), 2, Smoothing::WittenBell).unwrap();
    let identical = SelectionModels {
        in_source: shared.clone(),
        out_source: shared.clone(),
        target: None,
    };
    let (selected, _) = select(&ten, &SelectionConfig::new(0.8), &identical).unwrap();
    assert_eq!(selected.len(), 8);

    // Monotone subsets across ratios on a randomly scored corpus.
    let mut gen = TinyCorpusGen::new(909);
    let general_sentences = gen.corpus(8, 40, 6);
    let general = ParallelCorpus::new(
        general_sentences
            .iter()
            .map(|s| {
                let sent = Sentence::from_tokens(s.iter().map(Token::new).collect());
                BiSegment::new(sent.clone(), sent)
            })
            .collect(),
        "pl",
        "en",
    );
    let in_sentences = gen.corpus(8, 6, 6);
    let in_domain = ParallelCorpus::new(
        in_sentences
            .iter()
            .map(|s| {
                let sent = Sentence::from_tokens(s.iter().map(Token::new).collect());
                BiSegment::new(sent.clone(), sent)
            })
            .collect(),
        "pl",
        "en",
    );
    let cfg = SelectionConfig {
        in_domain_sample_size: 1000,
        ..SelectionConfig::new(1.0)
    };
    let models = train_selection_models(&in_domain, &general, &cfg, 5).unwrap();
    let mut previous: Option<Vec<String>> = None;
    for ratio in [0.2, 0.5, 0.8, 1.0] {
        let cfg = SelectionConfig {
            keep_ratio: ratio,
            ..cfg.clone()
        };
        let (kept, _) = select(&general, &cfg, &models).unwrap();
        let keys: Vec<String> = kept
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{i}-{}", s.source.raw))
            .collect();
        // Survivor identity via position in the previous (larger) list.
        let raw_keys: Vec<String> = kept.segments.iter().map(|s| s.source.raw.clone()).collect();
        if let Some(prev) = &previous {
            let mut cursor = 0usize;
            for key in prev {
                match raw_keys[cursor..].iter().position(|k| k == key) {
                    Some(offset) => cursor += offset + 1,
                    None => panic!("ratio {ratio}: {key:?} fell out of the selection"),
                }
            }
        }
        previous = Some(raw_keys);
        let _ = keys;
    }

    // Verbatim in-domain text outranks out-of-domain under disjoint models.
    let in_domain = ParallelCorpus::new(
        vec![
            BiSegment::new(tokenize("nauka o gwiazdach"), tokenize("science of stars")),
            BiSegment::new(tokenize("gwiazdy i nauka"), tokenize("stars and science")),
        ],
        "pl",
        "en",
    );
    let general = ParallelCorpus::new(
        vec![
            BiSegment::new(tokenize("przepis na ciasto"), tokenize("recipe for cake")),
            BiSegment::new(tokenize("ciasto z jabłkami"), tokenize("cake with apples")),
        ],
        "pl",
        "en",
    );
    let cfg = SelectionConfig {
        in_domain_sample_size: 100,
        ..SelectionConfig::new(0.8)
    };
    let models = train_selection_models(&in_domain, &general, &cfg, 11).unwrap();
    let t = models.target.as_ref().map(|(a, b)| (a, b));
    let in_score = mml_score(&in_domain.segments[0], &models.in_source, &models.out_source, t);
    let out_score = mml_score(&general.segments[0], &models.in_source, &models.out_source, t);
    assert!(
        in_score < out_score,
        "in-domain {in_score} vs out-of-domain {out_score}"
    );
    pass(9, started, "keep counts, monotone subsets, and score ordering hold");
}

// --- Criterion 10: restorer ------------------------------------------------

#[test]
fn acceptance_10_restorer() {
    let started = Instant::now();

    // Identity on 1,000 random sentences.
    let vocab = [
        "Ala", "ma", "kota", "2014", ".", ",", "W", "roku", "DOM", "pies", "-", "0,8",
    ];
    let mut gen = TinyCorpusGen::new(1010);
    for _ in 0..1000 {
        let tokens: Vec<Token> = (0..gen.below(9))
            .map(|_| Token::new(vocab[gen.below(vocab.len())]))
            .collect();
        let s = Sentence::from_tokens(tokens);
        assert_eq!(restore(&s, &s).tokens, s.tokens);
    }

    // The casing/punctuation fixture.
    let restored = restore(&tokenize("Ala ma kota."), &tokenize("ala mieć kot"));
    assert_eq!(restored.detokenized(), "Ala mieć kot .");

    // Punctuation and numbers survive restoration against random lemma
    // streams, in their original relative order.
    for _ in 0..500 {
        let orig_tokens: Vec<Token> = (0..gen.below(8))
            .map(|_| Token::new(vocab[gen.below(vocab.len())]))
            .collect();
        let lemma_tokens: Vec<Token> = (0..gen.below(8))
            .map(|_| Token::new(vocab[gen.below(vocab.len())].to_lowercase()))
            .collect();
        let orig = Sentence::from_tokens(orig_tokens);
        let lemma = Sentence::from_tokens(lemma_tokens);
        let restored = restore(&orig, &lemma);
        let surfaces: Vec<&str> = restored.tokens.iter().map(|t| t.surface.as_str()).collect();
        let special: Vec<&str> = orig
            .tokens
            .iter()
            .filter(|t| t.is_punctuation() || t.is_numeric())
            .map(|t| t.surface.as_str())
            .collect();
        let mut cursor = 0usize;
        for needle in &special {
            match surfaces[cursor..].iter().position(|s| s == needle) {
                Some(offset) => cursor += offset + 1,
                None => panic!("{needle:?} lost: orig {:?} -> {surfaces:?}", orig.surfaces()),
            }
        }
    }
    pass(10, started, "identity, fixture, and token-survival properties hold");
}

// --- Criterion 11: end-to-end recipe ---------------------------------------

fn write_pipeline_inputs(dir: &std::path::Path) {
    let pl_words = ["ala", "ma", "kota", "pies", "dom", "rok", "woda", "las"];
    let mut positives = String::new();
    let mut dict = String::new();
    for w in pl_words {
        dict.push_str(&format!("{w}\t{w}_en\t1.0\n"));
    }
    for i in 0..10 {
        let a = pl_words[i % 8];
        let b = pl_words[(i + 1) % 8];
        let c = pl_words[(i + 3) % 8];
        positives.push_str(&format!("{a} {b} {c}\t{a}_en {b}_en {c}_en\n"));
    }
    std::fs::write(dir.join("dict.tsv"), dict).unwrap();
    std::fs::write(dir.join("positives.tsv"), positives).unwrap();

    // A corrupted source with its target side.
    std::fs::write(
        dir.join("in.pl"),
        "ala ma kota ala ma kota\npies jest w domu\nwoda w lesie\nrok ma dwanaście miesięcy\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("in.en"),
        "ala has a cat\nthe dog is home\nwater in the woods\na year has twelve months\n",
    )
    .unwrap();

    // Two comparable documents: B carries one extra sentence.
    std::fs::write(dir.join("doc_a.txt"), "ala ma kota\npies ma dom\nrok ma wodę\n").unwrap();
    std::fs::write(
        dir.join("doc_b.txt"),
        "ala_en ma_en kota_en\nextra unrelated line\npies_en ma_en dom_en\nrok_en ma_en wodę\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("pairs.tsv"),
        format!(
            "{}\t{}\n",
            dir.join("doc_a.txt").display(),
            dir.join("doc_b.txt").display()
        ),
    )
    .unwrap();

    std::fs::write(dir.join("hyp.txt"), "ala ma kota w domu\npies pije wodę\n").unwrap();
    std::fs::write(dir.join("ref.txt"), "ala ma kota w lesie\npies pije wodę\n").unwrap();
}

fn pipeline_recipe(dir: &std::path::Path) -> String {
    let p = |name: &str| dir.join(name).display().to_string();
    format!(
        r#"seed = 42

[[stage]]
name = "clean"
[stage.params]
side = "source"
min_dup_len = 2
[stage.inputs]
src = "{in_pl}"
tgt = "{in_en}"
[stage.outputs]
src = "{out_pl}"
tgt = "{out_en}"
report = "{report}"

[[stage]]
name = "lm-train"
[stage.params]
order = 2
smoothing = "kn"
[stage.inputs]
corpus = "{out_pl}"
[stage.outputs]
model = "{arpa}"

[[stage]]
name = "train-classifier"
[stage.inputs]
positives = "{positives}"
dict = "{dict}"
[stage.outputs]
model = "{sim}"

[[stage]]
name = "mine"
[stage.params]
threshold = 0.4
gap = 0.49
[stage.inputs]
model = "{sim}"
dict = "{dict}"
pairs = "{pairs}"
[stage.outputs]
out = "{mined}"

[[stage]]
name = "select"
[stage.params]
keep = 0.8
sample = 100
order = 2
[stage.inputs]
in_domain = "{positives}"
general = "{mined}"
[stage.outputs]
out = "{selected}"
scores = "{scores}"

[[stage]]
name = "score"
[stage.params]
metrics = "bleu,nist,ter,meteor"
[stage.inputs]
hyp = "{hyp}"
refs = "{reference}"
[stage.outputs]
json = "{score_json}"
"#,
        in_pl = p("in.pl"),
        in_en = p("in.en"),
        out_pl = p("out.pl"),
        out_en = p("out.en"),
        report = p("report.tsv"),
        arpa = p("model.arpa"),
        positives = p("positives.tsv"),
        dict = p("dict.tsv"),
        sim = p("sim.model"),
        pairs = p("pairs.tsv"),
        mined = p("mined.tsv"),
        selected = p("selected.tsv"),
        scores = p("scores.tsv"),
        hyp = p("hyp.txt"),
        reference = p("ref.txt"),
        score_json = p("score.json"),
    )
}

#[test]
fn acceptance_11_end_to_end_recipe() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    write_pipeline_inputs(dir.path());
    let recipe_path = dir.path().join("recipe.toml");
    std::fs::write(&recipe_path, pipeline_recipe(dir.path())).unwrap();

    let outputs = [
        "out.pl", "out.en", "report.tsv", "model.arpa", "sim.model", "mined.tsv",
        "selected.tsv", "scores.tsv", "score.json",
    ];

    let first = run_recipe(&recipe_path, false).unwrap();
    assert_eq!(first.stages.len(), 6);
    assert!(first.stages.iter().all(|s| !s.skipped));
    let first_bytes: Vec<Vec<u8>> = outputs
        .iter()
        .map(|name| std::fs::read(dir.path().join(name)).unwrap())
        .collect();
    let mined = std::fs::read_to_string(dir.path().join("mined.tsv")).unwrap();
    assert!(
        mined.lines().count() >= 2,
        "mining found too little: {mined:?}"
    );

    // Second run from scratch: delete outputs and the manifest, re-run with
    // the same seed, and require byte-identical outputs and hashes.
    let manifest_file = manifest_path_for(&recipe_path);
    std::fs::remove_file(&manifest_file).unwrap();
    for name in &outputs {
        std::fs::remove_file(dir.path().join(name)).unwrap();
    }
    let second = run_recipe(&recipe_path, false).unwrap();
    assert!(second.stages.iter().all(|s| !s.skipped));
    for (name, before) in outputs.iter().zip(&first_bytes) {
        let after = std::fs::read(dir.path().join(name)).unwrap();
        assert_eq!(&after, before, "{name} differs between identical runs");
    }
    for (a, b) in first.stages.iter().zip(&second.stages) {
        assert_eq!(a.params_hash, b.params_hash);
        assert_eq!(a.inputs_hash, b.inputs_hash);
        assert_eq!(
            a.outputs.iter().map(|o| &o.sha256).collect::<Vec<_>>(),
            b.outputs.iter().map(|o| &o.sha256).collect::<Vec<_>>()
        );
    }

    // Third run with everything in place: all stages skip.
    let third = run_recipe(&recipe_path, false).unwrap();
    assert!(third.stages.iter().all(|s| s.skipped));

    assert!(started.elapsed() < Duration::from_secs(10), "exceeded 10 s");
    pass(11, started, "toy pipeline is deterministic and resumable");
}

// --- Criterion 12: classifier sanity ----------------------------------------

#[test]
fn acceptance_12_classifier_sanity() {
    let started = Instant::now();
    let words = [
        "ala", "ma", "kota", "pies", "dom", "drzewo", "woda", "ogien", "ziemia", "wiatr",
    ];
    let dict = ProbDictionary::from_entries(
        words
            .iter()
            .map(|w| ((w.to_string(), format!("{w}_en")), 1.0)),
    );
    // Ten positives with full dictionary coverage, ten negatives with none.
    let positives: Vec<BiSegment> = (0..10)
        .map(|i| {
            let a = words[i];
            let b = words[(i + 1) % 10];
            BiSegment::new(
                tokenize(&format!("{a} {b}")),
                tokenize(&format!("{a}_en {b}_en")),
            )
        })
        .collect();
    let negatives: Vec<BiSegment> = (0..10)
        .map(|i| {
            let a = words[i];
            let b = words[(i + 2) % 10];
            BiSegment::new(
                tokenize(&format!("{a} {b}")),
                tokenize(&format!("{}_en {}_en", words[(i + 5) % 10], words[(i + 7) % 10])),
            )
        })
        .collect();
    let (model, _) = train_classifier(&positives, &negatives, &dict, 42).unwrap();
    for seg in &positives {
        let f = featurize(&seg.source, &seg.target, &dict, 0.0, 0.0);
        assert!(
            model.likelihood(&f) > 0.5,
            "positive scored {}",
            model.likelihood(&f)
        );
    }
    for seg in &negatives {
        let f = featurize(&seg.source, &seg.target, &dict, 0.0, 0.0);
        assert!(
            model.likelihood(&f) < 0.5,
            "negative scored {}",
            model.likelihood(&f)
        );
    }
    let neutral = SimilarityModel::with_neutral_calibration(vec![0.0; 6], 0.0);
    assert!((neutral.likelihood_of_decision(0.0) - 0.5).abs() <= 1e-12);
    pass(12, started, "calibrated likelihoods separate the toy classes");
}
