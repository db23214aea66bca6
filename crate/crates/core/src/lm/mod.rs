//! Backoff n-gram language models with interpolated Kneser-Ney or
//! Witten-Bell smoothing, perplexity and cross-entropy scoring, and ARPA
//! serialization.
//!
//! Conventions: log base 10 internally and on disk (bits only at the
//! cross-entropy interface); `<s>` is context-only and never predicted;
//! `</s>` is predicted. Models are immutable once trained and safe to score
//! from many threads.

mod arpa;

pub use arpa::{read_arpa, write_arpa};

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Document, Sentence};
use crate::util::pairwise_sum;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const MAX_ORDER: usize = 6;

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// Log10 probability written for `<s>`, which is never predicted.
pub(crate) const BOS_LOG10: f64 = -99.0;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("model order must lie in 1..={MAX_ORDER}, got {0}")]
    InvalidOrder(usize),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("evaluation set is empty")]
    EmptyEval,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    ArpaParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: \\{n}-grams section declares {declared} entries, found {found}")]
    ArpaCountMismatch {
        path: String,
        n: usize,
        declared: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    KneserNeyInterpolated,
    WittenBell,
    NoneMle,
}

impl Smoothing {
    pub fn as_str(self) -> &'static str {
        match self {
            Smoothing::KneserNeyInterpolated => "kneser_ney_interpolated",
            Smoothing::WittenBell => "witten_bell",
            Smoothing::NoneMle => "none_mle",
        }
    }

    pub fn parse(s: &str) -> Option<Smoothing> {
        match s {
            "kn" | "kneser_ney" | "kneser_ney_interpolated" => {
                Some(Smoothing::KneserNeyInterpolated)
            }
            "wb" | "witten_bell" => Some(Smoothing::WittenBell),
            "mle" | "none" | "none_mle" => Some(Smoothing::NoneMle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub order: usize,
    pub smoothing: Smoothing,
    /// Map tokens seen exactly once in training to `<unk>` before counting,
    /// mirroring the `-unk` convention of common LM toolkits.
    pub map_singletons_to_unk: bool,
}

impl TrainOptions {
    pub fn new(order: usize, smoothing: Smoothing) -> TrainOptions {
        TrainOptions {
            order,
            smoothing,
            map_singletons_to_unk: false,
        }
    }
}

/// Perplexity over an evaluation set, with and without OOV events.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PerplexityReport {
    pub log10_prob_sum: f64,
    /// Scored events: every token plus one `</s>` per sentence.
    pub token_count: usize,
    pub oov_count: usize,
    pub ppl: f64,
    pub ppl_excluding_oov: f64,
}

#[derive(Debug, Default, Clone)]
struct Vocab {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn with_reserved() -> Vocab {
        let mut v = Vocab::default();
        for s in [BOS, EOS, UNK] {
            v.intern(s);
        }
        v
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    fn get(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    fn resolve(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    fn len(&self) -> usize {
        self.strings.len()
    }
}

type NGramMap<V> = HashMap<Box<[u32]>, V>;

/// A trained (or loaded) backoff n-gram model.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    smoothing: Option<Smoothing>,
    vocab: Vocab,
    /// Raw counts per order (`counts[n-1]` holds n-grams); empty for models
    /// loaded from ARPA.
    counts: Vec<NGramMap<u64>>,
    /// log10 conditional probabilities per order.
    probs: Vec<NGramMap<f64>>,
    /// log10 backoff weights per context length (`backoffs[l-1]` holds
    /// contexts of l tokens).
    backoffs: Vec<NGramMap<f64>>,
    /// Unsmoothed models answer exact n-gram lookups only; no backoff chain.
    exact_match_only: bool,
    /// Orders where Kneser-Ney discounting degenerated and Witten-Bell was
    /// used instead.
    fallback_orders: Vec<usize>,
}

/// Per-order interpolation parameters resolved during training.
enum OrderSmoothing {
    KneserNey { discount: f64 },
    WittenBell,
    Mle,
}

impl NGramModel {
    /// Train a model on a monolingual document.
    pub fn train(
        corpus: &Document,
        order: usize,
        smoothing: Smoothing,
    ) -> Result<NGramModel, LmError> {
        Self::train_with(corpus, &TrainOptions::new(order, smoothing))
    }

    pub fn train_with(corpus: &Document, opts: &TrainOptions) -> Result<NGramModel, LmError> {
        if opts.order < 1 || opts.order > MAX_ORDER {
            return Err(LmError::InvalidOrder(opts.order));
        }
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let order = opts.order;

        let mut vocab = Vocab::with_reserved();
        let mut raw_freq: HashMap<&str, u64> = HashMap::new();
        for sentence in &corpus.sentences {
            for token in &sentence.tokens {
                *raw_freq.entry(token.surface.as_str()).or_insert(0) += 1;
            }
        }
        let map_token = |vocab: &mut Vocab, s: &str| -> u32 {
            if opts.map_singletons_to_unk && raw_freq.get(s) == Some(&1) {
                UNK_ID
            } else {
                vocab.intern(s)
            }
        };

        // Padded id streams: <s> w1 .. wk </s>.
        let streams: Vec<Vec<u32>> = corpus
            .sentences
            .iter()
            .map(|sentence| {
                let mut ids = Vec::with_capacity(sentence.len() + 2);
                ids.push(BOS_ID);
                for token in &sentence.tokens {
                    ids.push(map_token(&mut vocab, &token.surface));
                }
                ids.push(EOS_ID);
                ids
            })
            .collect();

        // Raw counts for every order.
        let mut counts: Vec<NGramMap<u64>> = vec![HashMap::new(); order];
        for stream in &streams {
            for n in 1..=order {
                if stream.len() < n {
                    continue;
                }
                for window in stream.windows(n) {
                    *counts[n - 1].entry(window.into()).or_insert(0) += 1;
                }
            }
        }

        // Effective count tables. Kneser-Ney replaces lower-order counts by
        // continuation counts (number of distinct left extensions), keeping
        // raw counts for <s>-initial n-grams, which can never be extended
        // to the left. The unigram table never includes <s> itself: it is
        // context-only.
        let effective: Vec<NGramMap<u64>> = (1..=order)
            .map(|n| {
                let mut table: NGramMap<u64> =
                    if opts.smoothing == Smoothing::KneserNeyInterpolated && n < order {
                        let mut t: NGramMap<u64> = HashMap::new();
                        for key in counts[n].keys() {
                            let suffix: Box<[u32]> = key[1..].into();
                            *t.entry(suffix).or_insert(0) += 1;
                        }
                        for (key, &c) in &counts[n - 1] {
                            if key[0] == BOS_ID {
                                t.insert(key.clone(), c);
                            }
                        }
                        t
                    } else {
                        counts[n - 1].clone()
                    };
                if n == 1 {
                    table.remove(&[BOS_ID][..]);
                }
                table
            })
            .collect();

        let mut model = NGramModel {
            order,
            smoothing: Some(opts.smoothing),
            vocab,
            counts,
            probs: vec![HashMap::new(); order],
            backoffs: vec![HashMap::new(); order.saturating_sub(1)],
            exact_match_only: opts.smoothing == Smoothing::NoneMle,
            fallback_orders: Vec::new(),
        };

        // Resolve the per-order smoothing up front. The Kneser-Ney discount
        // D = n1 / (n1 + 2 n2) degenerates when n1 or n2 is zero (D of zero
        // would leave unseen events with no probability mass), so such
        // orders fall back to Witten-Bell.
        let order_smoothing: Vec<OrderSmoothing> = (1..=order)
            .map(|n| match opts.smoothing {
                Smoothing::NoneMle => OrderSmoothing::Mle,
                Smoothing::WittenBell => OrderSmoothing::WittenBell,
                Smoothing::KneserNeyInterpolated => {
                    let table = &effective[n - 1];
                    let n1 = table.values().filter(|&&c| c == 1).count() as f64;
                    let n2 = table.values().filter(|&&c| c == 2).count() as f64;
                    if n1 == 0.0 || n2 == 0.0 {
                        model.fallback_orders.push(n);
                        OrderSmoothing::WittenBell
                    } else {
                        OrderSmoothing::KneserNey {
                            discount: n1 / (n1 + 2.0 * n2),
                        }
                    }
                }
            })
            .collect();

        let predicted: Vec<u32> = (0..model.vocab.len() as u32)
            .filter(|&id| id != BOS_ID)
            .collect();
        let uniform = 1.0 / predicted.len() as f64;

        // Unigram level.
        {
            let table = &effective[0];
            let denom: f64 = table.values().sum::<u64>() as f64;
            let types = table.len() as f64;
            match &order_smoothing[0] {
                OrderSmoothing::KneserNey { discount } => {
                    let gamma = discount * types / denom;
                    for &w in &predicted {
                        let c = table.get(&[w][..]).copied().unwrap_or(0) as f64;
                        let p = (c - discount).max(0.0) / denom + gamma * uniform;
                        model.probs[0].insert(Box::from([w]), p.log10());
                    }
                }
                OrderSmoothing::WittenBell => {
                    let lambda = denom / (denom + types);
                    for &w in &predicted {
                        let c = table.get(&[w][..]).copied().unwrap_or(0) as f64;
                        let p = lambda * c / denom + (1.0 - lambda) * uniform;
                        model.probs[0].insert(Box::from([w]), p.log10());
                    }
                }
                OrderSmoothing::Mle => {
                    for (key, &c) in table {
                        let p = c as f64 / denom;
                        model.probs[0].insert(key.clone(), p.log10());
                    }
                }
            }
            model.probs[0].insert(Box::from([BOS_ID]), BOS_LOG10);
        }

        // Higher orders, bottom-up so lower-order interpolation targets are
        // already in place.
        for n in 2..=order {
            let table = &effective[n - 1];
            let mut by_context: HashMap<&[u32], Vec<(u32, u64)>> = HashMap::new();
            for (key, &c) in table {
                by_context
                    .entry(&key[..n - 1])
                    .or_default()
                    .push((key[n - 1], c));
            }
            for (context, continuations) in by_context {
                let denom: f64 = continuations.iter().map(|&(_, c)| c).sum::<u64>() as f64;
                let types = continuations.len() as f64;
                match &order_smoothing[n - 1] {
                    OrderSmoothing::KneserNey { discount } => {
                        let gamma = discount * types / denom;
                        for &(w, c) in &continuations {
                            let lower = self::linear(model.backoff_log10(&context[1..], w));
                            let p = (c as f64 - discount).max(0.0) / denom + gamma * lower;
                            let mut key = context.to_vec();
                            key.push(w);
                            model.probs[n - 1].insert(key.into(), p.log10());
                        }
                        model.backoffs[n - 2].insert(context.into(), gamma.log10());
                    }
                    OrderSmoothing::WittenBell => {
                        let lambda = denom / (denom + types);
                        for &(w, c) in &continuations {
                            let lower = self::linear(model.backoff_log10(&context[1..], w));
                            let p = lambda * c as f64 / denom + (1.0 - lambda) * lower;
                            let mut key = context.to_vec();
                            key.push(w);
                            model.probs[n - 1].insert(key.into(), p.log10());
                        }
                        model.backoffs[n - 2].insert(context.into(), (1.0 - lambda).log10());
                    }
                    OrderSmoothing::Mle => {
                        for &(w, c) in &continuations {
                            let p = c as f64 / denom;
                            let mut key = context.to_vec();
                            key.push(w);
                            model.probs[n - 1].insert(key.into(), p.log10());
                        }
                    }
                }
            }
        }

        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Option<Smoothing> {
        self.smoothing
    }

    /// Orders where Kneser-Ney discounting degenerated and Witten-Bell was
    /// substituted.
    pub fn kn_fallback_orders(&self) -> &[usize] {
        &self.fallback_orders
    }

    /// The predicted vocabulary: every token type plus `</s>` and `<unk>`,
    /// excluding `<s>`.
    pub fn predicted_vocab(&self) -> Vec<&str> {
        self.vocab
            .strings
            .iter()
            .filter(|s| s.as_str() != BOS)
            .map(|s| s.as_str())
            .collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.get(word).is_some()
    }

    /// Raw training count of an n-gram (0 when unseen or for loaded models).
    pub fn raw_count(&self, ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.counts.len() {
            return 0;
        }
        let Some(ids) = ngram
            .iter()
            .map(|w| self.vocab.get(w))
            .collect::<Option<Vec<u32>>>()
        else {
            return 0;
        };
        self.counts[ngram.len() - 1]
            .get(&ids[..])
            .copied()
            .unwrap_or(0)
    }

    /// Every observed context, as token strings, shortest first. These are
    /// exactly the conditioning histories with observed continuations.
    pub fn observed_contexts(&self) -> Vec<Vec<String>> {
        let mut contexts: Vec<Vec<String>> = vec![Vec::new()];
        let mut seen: std::collections::HashSet<Box<[u32]>> = std::collections::HashSet::new();
        for n in 2..=self.order {
            for key in self.probs[n - 1].keys() {
                let ctx: Box<[u32]> = key[..n - 1].into();
                if seen.insert(ctx.clone()) {
                    contexts.push(ctx.iter().map(|&id| self.vocab.resolve(id).to_string()).collect());
                }
            }
        }
        contexts.sort();
        contexts
    }

    fn id_or_unk(&self, word: &str) -> u32 {
        self.vocab.get(word).unwrap_or(UNK_ID)
    }

    /// Standard ARPA backoff recursion over interned ids.
    fn backoff_log10(&self, context: &[u32], word: u32) -> f64 {
        let mut key = Vec::with_capacity(context.len() + 1);
        key.extend_from_slice(context);
        key.push(word);
        if let Some(&lp) = self.probs[key.len() - 1].get(&key[..]) {
            return lp;
        }
        if context.is_empty() {
            return f64::NEG_INFINITY;
        }
        let bo = self.backoffs[context.len() - 1]
            .get(context)
            .copied()
            .unwrap_or(0.0);
        bo + self.backoff_log10(&context[1..], word)
    }

    fn cond_log10(&self, context: &[u32], word: u32) -> f64 {
        if self.exact_match_only {
            let mut key = Vec::with_capacity(context.len() + 1);
            key.extend_from_slice(context);
            key.push(word);
            return self.probs[key.len() - 1]
                .get(&key[..])
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
        }
        self.backoff_log10(context, word)
    }

    /// log10 P(word | context). The context is truncated to the model order;
    /// out-of-vocabulary tokens map to `<unk>`.
    pub fn log10_word_prob(&self, context: &[&str], word: &str) -> f64 {
        let start = context.len().saturating_sub(self.order - 1);
        let ctx: Vec<u32> = context[start..].iter().map(|w| self.id_or_unk(w)).collect();
        self.cond_log10(&ctx, self.id_or_unk(word))
    }

    /// Linear-space P(word | context).
    pub fn word_prob(&self, context: &[&str], word: &str) -> f64 {
        linear(self.log10_word_prob(context, word))
    }

    fn score_ids(&self, ids: &[u32], oov_flags: &[bool]) -> SentenceScore {
        let mut score = SentenceScore::default();
        for i in 1..ids.len() {
            let start = i.saturating_sub(self.order - 1);
            let lp = self.cond_log10(&ids[start..i], ids[i]);
            score.log10_sum += lp;
            score.events += 1;
            if oov_flags[i] {
                score.oov += 1;
            } else {
                score.log10_sum_known += lp;
            }
        }
        score
    }

    fn score_sentence(&self, sentence: &Sentence) -> SentenceScore {
        let mut ids = Vec::with_capacity(sentence.len() + 2);
        let mut oov = Vec::with_capacity(sentence.len() + 2);
        ids.push(BOS_ID);
        oov.push(false);
        for token in &sentence.tokens {
            let known = self.vocab.get(&token.surface);
            ids.push(known.unwrap_or(UNK_ID));
            oov.push(known.is_none());
        }
        ids.push(EOS_ID);
        oov.push(false);
        self.score_ids(&ids, &oov)
    }

    /// Total log10 probability of one sentence (all tokens plus `</s>`).
    pub fn sentence_log10_prob(&self, sentence: &Sentence) -> f64 {
        self.score_sentence(sentence).log10_sum
    }

    /// Cross-entropy of one sentence in bits per token, the denominator
    /// counting every token plus the `</s>` event.
    pub fn cross_entropy(&self, sentence: &Sentence) -> f64 {
        let score = self.score_sentence(sentence);
        if score.events == 0 {
            return 0.0;
        }
        -score.log10_sum / score.events as f64 / std::f64::consts::LOG10_2
    }

    /// Perplexity over an evaluation document. OOV tokens are scored through
    /// `<unk>` and counted; `ppl_excluding_oov` removes those events from
    /// both the numerator and denominator.
    pub fn perplexity(&self, eval: &Document) -> Result<PerplexityReport, LmError> {
        if eval.is_empty() {
            return Err(LmError::EmptyEval);
        }
        let scores: Vec<SentenceScore> = eval
            .sentences
            .par_iter()
            .map(|s| self.score_sentence(s))
            .collect();
        let log10_prob_sum = pairwise_sum(&scores.iter().map(|s| s.log10_sum).collect::<Vec<_>>());
        let known_sum =
            pairwise_sum(&scores.iter().map(|s| s.log10_sum_known).collect::<Vec<_>>());
        let token_count: usize = scores.iter().map(|s| s.events).sum();
        let oov_count: usize = scores.iter().map(|s| s.oov).sum();
        let ppl = 10f64.powf(-log10_prob_sum / token_count as f64);
        let known_events = token_count - oov_count;
        let ppl_excluding_oov = if known_events == 0 {
            f64::NAN
        } else {
            10f64.powf(-known_sum / known_events as f64)
        };
        Ok(PerplexityReport {
            log10_prob_sum,
            token_count,
            oov_count,
            ppl,
            ppl_excluding_oov,
        })
    }

    // Accessors used by the ARPA serializer.
    pub(crate) fn sections(&self) -> &[NGramMap<f64>] {
        &self.probs
    }

    pub(crate) fn backoff_sections(&self) -> &[NGramMap<f64>] {
        &self.backoffs
    }

    pub(crate) fn resolve_ids(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().map(|&id| self.vocab.resolve(id)).collect()
    }

    pub(crate) fn from_arpa_parts(
        order: usize,
        smoothing: Option<Smoothing>,
        vocab_words: Vec<String>,
        probs: Vec<Vec<(Vec<String>, f64)>>,
        backoffs: Vec<Vec<(Vec<String>, f64)>>,
    ) -> NGramModel {
        let mut vocab = Vocab::with_reserved();
        for w in vocab_words {
            vocab.intern(&w);
        }
        let mut prob_maps: Vec<NGramMap<f64>> = vec![HashMap::new(); order];
        for (n_idx, entries) in probs.into_iter().enumerate() {
            for (words, lp) in entries {
                let ids: Box<[u32]> = words.iter().map(|w| vocab.intern(w)).collect();
                prob_maps[n_idx].insert(ids, lp);
            }
        }
        let mut backoff_maps: Vec<NGramMap<f64>> = vec![HashMap::new(); order.saturating_sub(1)];
        for (l_idx, entries) in backoffs.into_iter().enumerate() {
            for (words, bo) in entries {
                let ids: Box<[u32]> = words.iter().map(|w| vocab.intern(w)).collect();
                backoff_maps[l_idx].insert(ids, bo);
            }
        }
        NGramModel {
            order,
            smoothing,
            vocab,
            counts: Vec::new(),
            probs: prob_maps,
            backoffs: backoff_maps,
            exact_match_only: smoothing == Some(Smoothing::NoneMle),
            fallback_orders: Vec::new(),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct SentenceScore {
    log10_sum: f64,
    log10_sum_known: f64,
    events: usize,
    oov: usize,
}

fn linear(log10: f64) -> f64 {
    10f64.powf(log10)
}
