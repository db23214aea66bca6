//! Shared test-side oracles. Everything here recomputes expected values
//! directly from definitions, independently of the library's internal
//! tables, so the two sides can disagree.

#![allow(dead_code)]

use std::collections::HashMap;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSmoothing {
    KneserNey,
    WittenBell,
}

enum OrderParams {
    KneserNey { discount: f64 },
    WittenBell,
}

/// Direct evaluation of the interpolated Kneser-Ney / Witten-Bell
/// recursions from scratch-built count tables.
pub struct OracleLm {
    order: usize,
    /// Effective count tables per order (continuation counts for KN lower
    /// orders, raw otherwise); the `<s>` unigram is excluded.
    tables: Vec<HashMap<Vec<String>, u64>>,
    per_order: Vec<OrderParams>,
    /// Predicted vocabulary: token types plus `</s>` and `<unk>`.
    vocab: Vec<String>,
}

impl OracleLm {
    pub fn build(sentences: &[Vec<String>], order: usize, smoothing: OracleSmoothing) -> OracleLm {
        let streams: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| {
                let mut v = Vec::with_capacity(s.len() + 2);
                v.push(BOS.to_string());
                v.extend(s.iter().cloned());
                v.push(EOS.to_string());
                v
            })
            .collect();

        let mut raw: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); order + 1];
        for stream in &streams {
            for n in 1..=(order + 1).min(stream.len()) {
                for window in stream.windows(n) {
                    *raw[n - 1].entry(window.to_vec()).or_insert(0) += 1;
                }
            }
        }

        let mut tables: Vec<HashMap<Vec<String>, u64>> = Vec::with_capacity(order);
        for n in 1..=order {
            let mut table = if smoothing == OracleSmoothing::KneserNey && n < order {
                // Continuation counts: distinct left extensions, except
                // <s>-initial n-grams, which keep raw counts.
                let mut t: HashMap<Vec<String>, u64> = HashMap::new();
                for key in raw[n].keys() {
                    *t.entry(key[1..].to_vec()).or_insert(0) += 1;
                }
                for (key, &c) in &raw[n - 1] {
                    if key[0] == BOS {
                        t.insert(key.clone(), c);
                    }
                }
                t
            } else {
                raw[n - 1].clone()
            };
            if n == 1 {
                table.remove(&vec![BOS.to_string()]);
            }
            tables.push(table);
        }

        let per_order = (1..=order)
            .map(|n| match smoothing {
                OracleSmoothing::WittenBell => OrderParams::WittenBell,
                OracleSmoothing::KneserNey => {
                    let n1 = tables[n - 1].values().filter(|&&c| c == 1).count() as f64;
                    let n2 = tables[n - 1].values().filter(|&&c| c == 2).count() as f64;
                    if n1 == 0.0 || n2 == 0.0 {
                        OrderParams::WittenBell
                    } else {
                        OrderParams::KneserNey {
                            discount: n1 / (n1 + 2.0 * n2),
                        }
                    }
                }
            })
            .collect();

        let mut vocab: Vec<String> = raw[0]
            .keys()
            .map(|k| k[0].clone())
            .filter(|w| w != BOS)
            .collect();
        if !vocab.iter().any(|w| w == UNK) {
            vocab.push(UNK.to_string());
        }
        vocab.sort();
        vocab.dedup();

        OracleLm {
            order,
            tables,
            per_order,
            vocab,
        }
    }

    pub fn predicted_vocab(&self) -> &[String] {
        &self.vocab
    }

    fn map_word(&self, w: &str) -> String {
        if w == BOS || w == EOS || w == UNK || self.vocab.iter().any(|v| v == w) {
            w.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// P(word | context) by direct recursion.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let word = self.map_word(word);
        let mapped: Vec<String> = context.iter().map(|w| self.map_word(w)).collect();
        let keep = mapped.len().min(self.order - 1);
        let h: Vec<String> = mapped[mapped.len() - keep..].to_vec();
        self.recurse(h.len() + 1, &h, &word)
    }

    fn recurse(&self, n: usize, h: &[String], w: &str) -> f64 {
        let table = &self.tables[n - 1];
        if n == 1 {
            let denom: f64 = table.values().sum::<u64>() as f64;
            let types = table.len() as f64;
            let c = table.get(&vec![w.to_string()]).copied().unwrap_or(0) as f64;
            let uniform = 1.0 / self.vocab.len() as f64;
            return match &self.per_order[0] {
                OrderParams::KneserNey { discount } => {
                    (c - discount).max(0.0) / denom + discount * types / denom * uniform
                }
                OrderParams::WittenBell => {
                    let lambda = denom / (denom + types);
                    lambda * c / denom + (1.0 - lambda) * uniform
                }
            };
        }
        let mut denom = 0u64;
        let mut types = 0u64;
        for (key, &c) in table {
            if key.len() == n && key[..n - 1] == *h {
                denom += c;
                types += 1;
            }
        }
        if denom == 0 {
            // Unobserved context: the backoff weight is implicitly one.
            return self.recurse(n - 1, &h[1..], w);
        }
        let mut full = h.to_vec();
        full.push(w.to_string());
        let c = table.get(&full).copied().unwrap_or(0) as f64;
        let lower = self.recurse(n - 1, &h[1..], w);
        match &self.per_order[n - 1] {
            OrderParams::KneserNey { discount } => {
                let gamma = discount * types as f64 / denom as f64;
                (c - discount).max(0.0) / denom as f64 + gamma * lower
            }
            OrderParams::WittenBell => {
                let lambda = denom as f64 / (denom as f64 + types as f64);
                lambda * c / denom as f64 + (1.0 - lambda) * lower
            }
        }
    }

    /// Perplexity over sentences by direct evaluation: every token plus one
    /// `</s>` event per sentence, contexts truncated to the model order.
    pub fn perplexity(&self, sentences: &[Vec<String>]) -> f64 {
        let mut log10_sum = 0.0;
        let mut events = 0usize;
        for sentence in sentences {
            let mut stream: Vec<String> = vec![BOS.to_string()];
            stream.extend(sentence.iter().cloned());
            stream.push(EOS.to_string());
            for i in 1..stream.len() {
                let start = i.saturating_sub(self.order - 1);
                let ctx: Vec<&str> = stream[start..i].iter().map(|s| s.as_str()).collect();
                log10_sum += self.prob(&ctx, &stream[i]).log10();
                events += 1;
            }
        }
        10f64.powf(-log10_sum / events as f64)
    }
}

/// Deterministic pseudo-random corpus generator for oracle sweeps.
pub struct TinyCorpusGen {
    state: u64,
}

impl TinyCorpusGen {
    pub fn new(seed: u64) -> TinyCorpusGen {
        TinyCorpusGen {
            state: seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        // splitmix64
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// A corpus of `sentences` sentences over `vocab_size` word types.
    pub fn corpus(
        &mut self,
        vocab_size: usize,
        sentences: usize,
        max_len: usize,
    ) -> Vec<Vec<String>> {
        let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
        (0..sentences)
            .map(|_| {
                let len = self.below(max_len) + 1;
                (0..len).map(|_| vocab[self.below(vocab_size)].clone()).collect()
            })
            .collect()
    }
}
