//! Modified Moore-Lewis data selection: rank out-of-domain bi-sentences by
//! bilingual cross-entropy difference between in-domain and out-of-domain
//! language models, keep the best-scoring ratio. Lower scores are more
//! in-domain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{BiSegment, Document, ParallelCorpus};
use crate::lm::{LmError, NGramModel, Smoothing};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("selection corpus is empty")]
    EmptyCorpus,
    #[error("keep ratio must lie in (0,1], got {0}")]
    BadKeepRatio(f64),
    #[error("sample size must be at least 1")]
    BadSampleSize,
    #[error(transparent)]
    Lm(#[from] LmError),
}

/// Selection parameters. The defaults mirror a working recipe: sample
/// 150,000 in-domain bi-sentences and score with order-3 Witten-Bell models
/// (robust on small samples, where Kneser-Ney count-of-count statistics are
/// fragile). There is deliberately no default keep ratio: how much to keep
/// is corpus-dependent and must be an explicit choice.
#[derive(Debug, Clone)]
pub struct SelectionConfig {
    pub in_domain_sample_size: usize,
    pub keep_ratio: f64,
    pub lm_order: usize,
    pub bilingual: bool,
}

impl SelectionConfig {
    pub fn new(keep_ratio: f64) -> SelectionConfig {
        SelectionConfig {
            in_domain_sample_size: 150_000,
            keep_ratio,
            lm_order: 3,
            bilingual: true,
        }
    }

    fn validate(&self) -> Result<(), SelectError> {
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(SelectError::BadKeepRatio(self.keep_ratio));
        }
        Ok(())
    }
}

/// The four language models behind bilingual scoring; monolingual mode
/// carries no target pair.
#[derive(Debug)]
pub struct SelectionModels {
    pub in_source: NGramModel,
    pub out_source: NGramModel,
    pub target: Option<(NGramModel, NGramModel)>,
}

/// A scored segment; lower means more in-domain.
#[derive(Debug, Clone)]
pub struct RankedSegment {
    pub segment: BiSegment,
    pub score: f64,
}

/// Cross-entropy difference score:
/// [H_in(src) - H_out(src)] + [H_in(tgt) - H_out(tgt)], in bits per token;
/// the target term is dropped in monolingual mode.
pub fn mml_score(
    seg: &BiSegment,
    in_source: &NGramModel,
    out_source: &NGramModel,
    target_models: Option<(&NGramModel, &NGramModel)>,
) -> f64 {
    let src = in_source.cross_entropy(&seg.source) - out_source.cross_entropy(&seg.source);
    let tgt = match target_models {
        Some((in_target, out_target)) => {
            in_target.cross_entropy(&seg.target) - out_target.cross_entropy(&seg.target)
        }
        None => 0.0,
    };
    src + tgt
}

/// Score every segment; order matches the corpus.
pub fn score_corpus(corpus: &ParallelCorpus, models: &SelectionModels) -> Vec<f64> {
    corpus
        .segments
        .par_iter()
        .map(|seg| {
            mml_score(
                seg,
                &models.in_source,
                &models.out_source,
                models.target.as_ref().map(|(a, b)| (a, b)),
            )
        })
        .collect()
}

/// Keep the ceil(keep_ratio * N) lowest-scored segments, original order
/// preserved among survivors; ties break toward the earlier index. The
/// ceiling guarantees a positive ratio never empties a non-empty corpus.
pub fn select(
    corpus: &ParallelCorpus,
    cfg: &SelectionConfig,
    models: &SelectionModels,
) -> Result<(ParallelCorpus, Vec<RankedSegment>), SelectError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(SelectError::EmptyCorpus);
    }
    let scores = score_corpus(corpus, models);
    let keep = keep_count(corpus.len(), cfg.keep_ratio);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut kept = vec![false; corpus.len()];
    for &idx in order.iter().take(keep) {
        kept[idx] = true;
    }
    let survivors: Vec<BiSegment> = corpus
        .segments
        .iter()
        .enumerate()
        .filter(|(i, _)| kept[*i])
        .map(|(_, seg)| seg.clone())
        .collect();
    let ranked: Vec<RankedSegment> = corpus
        .segments
        .iter()
        .zip(&scores)
        .map(|(seg, &score)| RankedSegment {
            segment: seg.clone(),
            score,
        })
        .collect();
    Ok((
        ParallelCorpus::new(survivors, &corpus.source_lang, &corpus.target_lang),
        ranked,
    ))
}

pub fn keep_count(n: usize, keep_ratio: f64) -> usize {
    ((keep_ratio * n as f64).ceil() as usize).min(n)
}

/// Uniform sample without replacement, deterministic for a seed; `n` is
/// clipped to the corpus size. Sampled segments keep their original order.
pub fn sample_in_domain(
    corpus: &ParallelCorpus,
    n: usize,
    seed: u64,
) -> Result<ParallelCorpus, SelectError> {
    if n == 0 {
        return Err(SelectError::BadSampleSize);
    }
    if n >= corpus.len() {
        return Ok(corpus.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, corpus.len(), n).into_vec();
    picked.sort_unstable();
    let segments = picked
        .into_iter()
        .map(|i| corpus.segments[i].clone())
        .collect();
    Ok(ParallelCorpus::new(
        segments,
        &corpus.source_lang,
        &corpus.target_lang,
    ))
}

/// Train the selection models: in-domain models on a seeded sample of the
/// in-domain corpus, out-of-domain models on an equally sized seeded sample
/// of the general corpus.
pub fn train_selection_models(
    in_domain: &ParallelCorpus,
    general: &ParallelCorpus,
    cfg: &SelectionConfig,
    seed: u64,
) -> Result<SelectionModels, SelectError> {
    let in_sample = sample_in_domain(in_domain, cfg.in_domain_sample_size, seed)?;
    let out_sample = sample_in_domain(general, cfg.in_domain_sample_size, seed.wrapping_add(1))?;
    let train = |doc: &Document| NGramModel::train(doc, cfg.lm_order, Smoothing::WittenBell);
    let in_source = train(&in_sample.source_document("in-domain"))?;
    let out_source = train(&out_sample.source_document("general"))?;
    let target = if cfg.bilingual {
        Some((
            train(&in_sample.target_document("in-domain"))?,
            train(&out_sample.target_document("general"))?,
        ))
    } else {
        None
    };
    Ok(SelectionModels {
        in_source,
        out_source,
        target,
    })
}
