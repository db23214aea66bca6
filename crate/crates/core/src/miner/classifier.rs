//! The sentence-pair similarity model: a linear max-margin classifier with
//! sigmoid calibration, so the decision value becomes a likelihood in (0,1).
//! Training is deterministic given a seed; every knob that affects the fit
//! is recorded in the model file.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::BiSegment;
use crate::miner::dictionary::ProbDictionary;
use crate::miner::features::{featurize, FeatureVector, FEATURE_DIM, FEATURE_NAMES};
use crate::miner::MinerError;
use crate::util::sha256_hex;

const MODEL_VERSION: u32 = 1;
const EPOCHS: usize = 300;
const LAMBDA: f64 = 0.01;

/// Linear classifier plus Platt calibration:
/// likelihood(x) = 1 / (1 + exp(A * (w.x + b) + B)).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimilarityModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Platt scale A; negative for a correctly oriented classifier.
    pub sigmoid_scale: f64,
    /// Platt offset B.
    pub sigmoid_offset: f64,
}

impl SimilarityModel {
    /// Uncalibrated identity sigmoid: A = -1, B = 0, so a decision value of
    /// zero maps to likelihood 0.5.
    pub fn with_neutral_calibration(weights: Vec<f64>, bias: f64) -> SimilarityModel {
        SimilarityModel {
            weights,
            bias,
            sigmoid_scale: -1.0,
            sigmoid_offset: 0.0,
        }
    }

    pub fn decision(&self, x: &FeatureVector) -> f64 {
        self.weights
            .iter()
            .zip(x.values())
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn likelihood_of_decision(&self, decision: f64) -> f64 {
        1.0 / (1.0 + (self.sigmoid_scale * decision + self.sigmoid_offset).exp())
    }

    pub fn likelihood(&self, x: &FeatureVector) -> f64 {
        self.likelihood_of_decision(self.decision(x))
    }
}

/// The versioned on-disk form: weights, calibration, the feature schema
/// hash, and the training recipe that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub feature_schema: Vec<String>,
    pub feature_schema_hash: String,
    pub model: SimilarityModel,
    pub training: TrainingMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub lambda: f64,
    pub schedule: String,
    pub positives: usize,
    pub negatives: usize,
    pub synthesized_negatives: bool,
}

pub fn feature_schema_hash() -> String {
    sha256_hex(FEATURE_NAMES.join("\n").as_bytes())
}

pub fn save_model(
    model: &SimilarityModel,
    meta: &TrainingMeta,
    path: impl AsRef<std::path::Path>,
) -> Result<(), MinerError> {
    let path = path.as_ref();
    let file = ModelFile {
        version: MODEL_VERSION,
        feature_schema: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        feature_schema_hash: feature_schema_hash(),
        model: model.clone(),
        training: meta.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("model serializes");
    crate::util::write_atomic(path, json.as_bytes()).map_err(|source| MinerError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<SimilarityModel, MinerError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| MinerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ModelFile =
        serde_json::from_str(&content).map_err(|e| MinerError::ModelFormat {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    if file.version != MODEL_VERSION {
        return Err(MinerError::ModelFormat {
            path: path.display().to_string(),
            message: format!("unsupported model version {}", file.version),
        });
    }
    if file.feature_schema_hash != feature_schema_hash() {
        return Err(MinerError::ModelFormat {
            path: path.display().to_string(),
            message: "feature schema hash does not match this build".to_string(),
        });
    }
    if file.model.weights.len() != FEATURE_DIM {
        return Err(MinerError::ModelFormat {
            path: path.display().to_string(),
            message: format!("expected {FEATURE_DIM} weights, found {}", file.model.weights.len()),
        });
    }
    Ok(file.model)
}

/// Full-batch Pegasos-style subgradient descent on regularized hinge loss.
/// No data shuffling, so the fit is a pure function of the inputs.
fn fit_svm(xs: &[FeatureVector], ys: &[f64]) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut w = vec![0.0f64; FEATURE_DIM];
    let mut b = 0.0f64;
    for t in 0..EPOCHS {
        let eta = 1.0 / (LAMBDA * (t as f64 + 2.0));
        let mut grad_w = vec![0.0f64; FEATURE_DIM];
        let mut grad_b = 0.0f64;
        for (x, &y) in xs.iter().zip(ys) {
            let margin = y * (dot(&w, x.values()) + b);
            if margin < 1.0 {
                for (g, v) in grad_w.iter_mut().zip(x.values()) {
                    *g -= y * v;
                }
                grad_b -= y;
            }
        }
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= eta * (LAMBDA * *wi + g / n);
        }
        b -= eta * (grad_b / n);
    }
    (w, b)
}

fn dot(w: &[f64], x: &[f64; FEATURE_DIM]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Platt's sigmoid fit: minimize the calibration set's negative
/// log-likelihood in (A, B) by Newton iterations with backtracking, using
/// the smoothed targets from the original algorithm.
fn fit_platt(decisions: &[f64], labels: &[bool]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { t_pos } else { t_neg }).collect();

    let mut a = 0.0f64;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = a * f + b;
                // Numerically stable cross-entropy of p = 1/(1+e^z).
                if z >= 0.0 {
                    t * z + (1.0 + (-z).exp()).ln()
                } else {
                    (t - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };
    let mut best = objective(a, b);
    for _ in 0..100 {
        // Gradient and Hessian of the objective.
        let (mut g_a, mut g_b) = (0.0f64, 0.0f64);
        let (mut h_aa, mut h_ab, mut h_bb) = (1e-12f64, 0.0f64, 1e-12f64);
        for (&f, &t) in decisions.iter().zip(&targets) {
            let z = a * f + b;
            let p = 1.0 / (1.0 + z.exp());
            let d1 = t - p;
            let d2 = p * (1.0 - p);
            g_a += f * d1;
            g_b += d1;
            h_aa += f * f * d2;
            h_ab += f * d2;
            h_bb += d2;
        }
        if g_a.abs() < 1e-10 && g_b.abs() < 1e-10 {
            break;
        }
        let det = h_aa * h_bb - h_ab * h_ab;
        let (da, db) = if det.abs() < 1e-18 {
            (-g_a, -g_b)
        } else {
            (
                -(h_bb * g_a - h_ab * g_b) / det,
                -(-h_ab * g_a + h_aa * g_b) / det,
            )
        };
        let mut step = 1.0f64;
        let mut improved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let val = objective(na, nb);
            if val < best - 1e-12 {
                a = na;
                b = nb;
                best = val;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

fn featurize_training_pair(seg: &BiSegment, dict: &ProbDictionary, prox: f64) -> FeatureVector {
    let mut f = featurize(&seg.source, &seg.target, dict, 0.0, 0.0);
    f.0[FEATURE_DIM - 1] = prox;
    f
}

/// Train the similarity classifier. When `negatives` is empty they are
/// synthesized by randomly mispairing the positives (seeded). Calibration
/// is fit on pooled held-out decision values from a 2-fold split; the final
/// weights come from a fit on everything.
pub fn train_classifier(
    positives: &[BiSegment],
    negatives: &[BiSegment],
    dict: &ProbDictionary,
    seed: u64,
) -> Result<(SimilarityModel, TrainingMeta), MinerError> {
    if positives.is_empty() {
        return Err(MinerError::EmptyPositives);
    }

    let mut xs: Vec<FeatureVector> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for seg in positives {
        xs.push(featurize_training_pair(seg, dict, 0.0));
        ys.push(1.0);
    }

    let synthesized = negatives.is_empty();
    if synthesized {
        if positives.len() < 2 {
            return Err(MinerError::DegenerateTraining(
                "cannot synthesize negatives from fewer than 2 positive pairs".to_string(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = positives.len();
        let mut targets: Vec<usize> = (0..n).collect();
        targets.shuffle(&mut rng);
        // Rotate any fixed point so every pair is genuinely mispaired.
        for i in 0..n {
            if targets[i] == i {
                let j = (i + 1) % n;
                targets.swap(i, j);
            }
        }
        for (i, &j) in targets.iter().enumerate() {
            let seg = BiSegment::new(positives[i].source.clone(), positives[j].target.clone());
            let prox = (i as f64 - j as f64).abs() / n as f64;
            xs.push(featurize_training_pair(&seg, dict, prox));
            ys.push(-1.0);
        }
    } else {
        for seg in negatives {
            xs.push(featurize_training_pair(seg, dict, 0.0));
            ys.push(-1.0);
        }
    }

    if ys.iter().all(|&y| y > 0.0) || ys.iter().all(|&y| y < 0.0) {
        return Err(MinerError::DegenerateTraining(
            "training data contains a single class".to_string(),
        ));
    }

    let (weights, bias) = fit_svm(&xs, &ys);
    let full = SimilarityModel::with_neutral_calibration(weights.clone(), bias);

    // Held-out decision values: 2-fold cross-fit, pooled. Degenerate folds
    // fall back to calibrating on the full fit's own decisions.
    let mut indices: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    indices.shuffle(&mut rng);
    let (fold_a, fold_b) = indices.split_at(indices.len() / 2);
    let mut calib: Vec<(f64, bool)> = Vec::with_capacity(xs.len());
    for (train_fold, eval_fold) in [(fold_a, fold_b), (fold_b, fold_a)] {
        let txs: Vec<FeatureVector> = train_fold.iter().map(|&i| xs[i]).collect();
        let tys: Vec<f64> = train_fold.iter().map(|&i| ys[i]).collect();
        let single_class = tys.iter().all(|&y| y > 0.0) || tys.iter().all(|&y| y < 0.0);
        if txs.is_empty() || single_class {
            calib.clear();
            break;
        }
        let (w, b) = fit_svm(&txs, &tys);
        let fold_model = SimilarityModel::with_neutral_calibration(w, b);
        for &i in eval_fold {
            calib.push((fold_model.decision(&xs[i]), ys[i] > 0.0));
        }
    }
    if calib.is_empty() {
        calib = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| (full.decision(x), y > 0.0))
            .collect();
    }
    let decisions: Vec<f64> = calib.iter().map(|&(d, _)| d).collect();
    let labels: Vec<bool> = calib.iter().map(|&(_, l)| l).collect();
    let (a, b) = fit_platt(&decisions, &labels);

    let model = SimilarityModel {
        weights,
        bias,
        sigmoid_scale: a,
        sigmoid_offset: b,
    };
    let meta = TrainingMeta {
        seed,
        epochs: EPOCHS,
        lambda: LAMBDA,
        schedule: "full-batch subgradient, eta_t = 1/(lambda*(t+2))".to_string(),
        positives: positives.len(),
        negatives: if synthesized { positives.len() } else { negatives.len() },
        synthesized_negatives: synthesized,
    };
    Ok((model, meta))
}
