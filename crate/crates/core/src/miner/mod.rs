//! Parallel sentence extraction from comparable document pairs: a trainable
//! sentence-similarity classifier, an optimal monotone sequence aligner
//! searched with A*, and threshold filtering.

mod align;
mod classifier;
mod dictionary;
mod features;

pub use align::{
    align, align_with, filter_alignment, mine, mine_documents, AlignStats, AlignedPair, Alignment,
};
pub use classifier::{
    feature_schema_hash, load_model, save_model, train_classifier, ModelFile, SimilarityModel,
    TrainingMeta,
};
pub use dictionary::{extract_dictionary, DictStats, ProbDictionary, DEFAULT_PROB_FIELD};
pub use features::{featurize, FeatureVector, FEATURE_DIM, FEATURE_NAMES};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("positive training pairs are required")]
    EmptyPositives,
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("{path}: {message}")]
    ModelFormat { path: String, message: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Document};

    #[test]
    fn mine_keeps_only_confident_pairs() {
        // Three-sentence documents with a model and dictionary arranged so
        // the aligner pairs them diagonally with known likelihoods, then
        // thresholds prune the weak pair.
        let a = Document::new("a", vec![tokenize("jeden"), tokenize("dwa"), tokenize("trzy")]);
        let b = Document::new("b", vec![tokenize("one"), tokenize("two"), tokenize("three")]);
        let dict = ProbDictionary::from_entries([
            (("jeden".to_string(), "one".to_string()), 0.9),
            (("dwa".to_string(), "two".to_string()), 0.5),
            (("trzy".to_string(), "three".to_string()), 0.8),
        ]);
        // Likelihood equals the src->tgt coverage: weight 1 on feature 0,
        // then a steep calibration to spread the outputs.
        let model = SimilarityModel {
            weights: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            sigmoid_scale: -8.0,
            sigmoid_offset: 4.0,
        };
        let all = mine(&a, &b, &model, &dict, 0.0, 0.2);
        assert_eq!(all.len(), 3);
        let scores: Vec<f64> = all.iter().map(|s| s.score.unwrap()).collect();
        assert!(scores[0] > 0.9 && scores[1] < 0.6 && scores[2] > 0.7);

        let confident = mine(&a, &b, &model, &dict, 0.7, 0.2);
        assert_eq!(confident.len(), 2);
        assert_eq!(confident[0].source.raw, "jeden");
        assert_eq!(confident[1].source.raw, "trzy");

        let perfect_only = mine(&a, &b, &model, &dict, 1.0, 0.2);
        assert!(perfect_only.is_empty());
    }

    #[test]
    fn mined_pairs_are_independent_of_other_documents() {
        let a = Document::new("a", vec![tokenize("kot"), tokenize("pies")]);
        let b = Document::new("b", vec![tokenize("cat"), tokenize("dog")]);
        let dict = ProbDictionary::from_entries([
            (("kot".to_string(), "cat".to_string()), 1.0),
            (("pies".to_string(), "dog".to_string()), 1.0),
        ]);
        let model = SimilarityModel::with_neutral_calibration(
            vec![2.0, 2.0, 0.0, 0.0, 0.0, 0.0],
            -1.0,
        );
        let alone = mine(&a, &b, &model, &dict, 0.5, 0.49);
        // Processing an unrelated pair first must not change the result.
        let unrelated_a = Document::new("x", vec![tokenize("zupa")]);
        let unrelated_b = Document::new("y", vec![tokenize("soup")]);
        let _ = mine(&unrelated_a, &unrelated_b, &model, &dict, 0.5, 0.49);
        let again = mine(&a, &b, &model, &dict, 0.5, 0.49);
        assert_eq!(alone, again);
        assert_eq!(alone.len(), 2);
    }
}
