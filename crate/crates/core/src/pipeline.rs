//! Declarative multi-stage recipes: a flat ordered list of stages, each a
//! named operation with parameters and input/output path bindings. Stages
//! write outputs atomically, a manifest records parameter and input hashes,
//! and re-running an unchanged recipe skips completed stages. All
//! randomness flows from one recipe-level seed, fanned out per stage.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cleaner::{clean_corpus, reports_to_tsv, Action, CleanOptions, Side};
use crate::corpus::{
    load_mono, load_parallel, load_parallel_tsv, tokenize, write_parallel, write_parallel_tsv,
    ParallelCorpus,
};
use crate::lm::{read_arpa, write_arpa, NGramModel, Smoothing, TrainOptions};
use crate::metrics::{lowercase_document, score_all, Metric};
use crate::miner::{load_model, mine_documents, save_model, train_classifier, ProbDictionary};
use crate::restorer::restore;
use crate::selector::{select, train_selection_models, SelectionConfig};
use crate::util::{fan_out_seed, sha256_hex, write_atomic};

pub const STAGE_NAMES: [&str; 8] = [
    "clean",
    "lm-train",
    "ppl",
    "mine",
    "train-classifier",
    "select",
    "score",
    "restore",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("recipe validation failed: {0}")]
    Validation(String),
    #[error("stage {index} ({name}) failed: {message}")]
    StageFailed {
        index: usize,
        name: String,
        message: String,
    },
    #[error("cannot read recipe {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 1 for validation problems, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::StageFailed { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageDecl {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

/// A parsed recipe: ordered stages plus the run-wide seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineRecipe {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "stage")]
    pub stages: Vec<StageDecl>,
}

impl PipelineRecipe {
    pub fn parse(text: &str) -> Result<PipelineRecipe, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestOutput {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestStage {
    pub index: usize,
    pub name: String,
    pub params_hash: String,
    pub inputs_hash: String,
    pub outputs: Vec<ManifestOutput>,
    pub elapsed_ms: u64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub stages: Vec<ManifestStage>,
}

/// Split an input binding into paths; multi-file bindings (reference sets)
/// are comma-separated.
fn binding_paths(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_string()).collect()
}

/// Check stage names and that every input is either an existing file or a
/// prior stage's declared output. Runs before any stage executes.
pub fn validate_recipe(recipe: &PipelineRecipe) -> Result<(), PipelineError> {
    let mut produced: BTreeSet<String> = BTreeSet::new();
    for (index, stage) in recipe.stages.iter().enumerate() {
        if !STAGE_NAMES.contains(&stage.name.as_str()) {
            return Err(PipelineError::Validation(format!(
                "stage {index}: unknown stage name {:?} (expected one of {})",
                stage.name,
                STAGE_NAMES.join(", ")
            )));
        }
        for (key, value) in &stage.inputs {
            for path in binding_paths(value) {
                if !produced.contains(&path) && !Path::new(&path).exists() {
                    return Err(PipelineError::Validation(format!(
                        "stage {index} ({}): input {key} = {path:?} is neither an existing \
                         file nor a prior stage output",
                        stage.name
                    )));
                }
            }
        }
        for value in stage.outputs.values() {
            produced.insert(value.clone());
        }
    }
    Ok(())
}

fn hash_params(params: &BTreeMap<String, toml::Value>) -> String {
    // BTreeMap keys are sorted, so this serialization is canonical.
    sha256_hex(serde_json::to_string(params).expect("params serialize").as_bytes())
}

fn hash_inputs(stage: &StageDecl) -> Result<String, String> {
    let mut acc = String::new();
    for (key, value) in &stage.inputs {
        for path in binding_paths(value) {
            let bytes = std::fs::read(&path).map_err(|e| format!("cannot read {path}: {e}"))?;
            acc.push_str(key);
            acc.push('\0');
            acc.push_str(&path);
            acc.push('\0');
            acc.push_str(&sha256_hex(&bytes));
            acc.push('\0');
        }
    }
    Ok(sha256_hex(acc.as_bytes()))
}

fn hash_outputs(stage: &StageDecl) -> Result<Vec<ManifestOutput>, String> {
    let mut outputs = Vec::new();
    for path in stage.outputs.values() {
        let bytes = std::fs::read(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        outputs.push(ManifestOutput {
            path: path.clone(),
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(outputs)
}

fn can_skip(
    previous: Option<&Manifest>,
    index: usize,
    stage: &StageDecl,
    params_hash: &str,
    inputs_hash: &str,
) -> Option<Vec<ManifestOutput>> {
    let prev = previous?.stages.get(index)?;
    if prev.name != stage.name || prev.params_hash != params_hash || prev.inputs_hash != inputs_hash
    {
        return None;
    }
    // Every declared output must still exist with the recorded content.
    for out in &prev.outputs {
        let bytes = std::fs::read(&out.path).ok()?;
        if sha256_hex(&bytes) != out.sha256 {
            return None;
        }
    }
    Some(prev.outputs.clone())
}

/// Execute a recipe file. The manifest is written next to the recipe as
/// `<recipe>.manifest.json`. With `force`, completed stages re-run anyway.
pub fn run_recipe(recipe_path: impl AsRef<Path>, force: bool) -> Result<Manifest, PipelineError> {
    let recipe_path = recipe_path.as_ref();
    let text = std::fs::read_to_string(recipe_path).map_err(|source| PipelineError::Io {
        path: recipe_path.display().to_string(),
        source,
    })?;
    let recipe = PipelineRecipe::parse(&text)?;
    validate_recipe(&recipe)?;

    let manifest_path = manifest_path_for(recipe_path);
    let previous: Option<Manifest> = std::fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());

    let mut manifest = Manifest {
        seed: recipe.seed,
        stages: Vec::with_capacity(recipe.stages.len()),
    };
    for (index, stage) in recipe.stages.iter().enumerate() {
        let fail = |message: String| PipelineError::StageFailed {
            index,
            name: stage.name.clone(),
            message,
        };
        let params_hash = hash_params(&stage.params);
        let inputs_hash = hash_inputs(stage).map_err(fail)?;
        if !force {
            if let Some(outputs) =
                can_skip(previous.as_ref(), index, stage, &params_hash, &inputs_hash)
            {
                manifest.stages.push(ManifestStage {
                    index,
                    name: stage.name.clone(),
                    params_hash,
                    inputs_hash,
                    outputs,
                    elapsed_ms: 0,
                    skipped: true,
                });
                continue;
            }
        }
        let started = Instant::now();
        let seed = fan_out_seed(recipe.seed, &format!("{index}:{}", stage.name));
        execute_stage(stage, seed).map_err(fail)?;
        let outputs = hash_outputs(stage).map_err(fail)?;
        manifest.stages.push(ManifestStage {
            index,
            name: stage.name.clone(),
            params_hash,
            inputs_hash,
            outputs,
            elapsed_ms: started.elapsed().as_millis() as u64,
            skipped: false,
        });
    }

    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, json.as_bytes()).map_err(|source| PipelineError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;
    Ok(manifest)
}

pub fn manifest_path_for(recipe_path: &Path) -> PathBuf {
    let mut name = recipe_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recipe".to_string());
    name.push_str(".manifest.json");
    recipe_path.with_file_name(name)
}

fn parse_params<T: serde::de::DeserializeOwned>(
    params: &BTreeMap<String, toml::Value>,
) -> Result<T, String> {
    let table: toml::map::Map<String, toml::Value> =
        params.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| format!("bad parameters: {e}"))
}

fn require<'a>(stage: &'a StageDecl, kind: &str, key: &str) -> Result<&'a str, String> {
    let map = if kind == "input" {
        &stage.inputs
    } else {
        &stage.outputs
    };
    map.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| format!("missing {kind} binding {key:?}"))
}

/// Parse a side selector: source/target/both, or a language tag from the
/// corpus itself (so `--side pl` works against a pl/en pair).
pub fn parse_side(value: &str, corpus: &ParallelCorpus) -> Result<Side, String> {
    match value {
        "source" | "src" => Ok(Side::Source),
        "target" | "tgt" => Ok(Side::Target),
        "both" => Ok(Side::Both),
        tag if tag == corpus.source_lang => Ok(Side::Source),
        tag if tag == corpus.target_lang => Ok(Side::Target),
        other => Err(format!(
            "unknown side {other:?}; expected source, target, both, or a language tag \
             ({} / {})",
            corpus.source_lang, corpus.target_lang
        )),
    }
}

/// Build cleaner options from the textual parameter form shared by the CLI
/// and recipes.
pub fn clean_options(
    side: &str,
    patterns: &str,
    max_len: usize,
    min_dup_len: usize,
    drop_dups: bool,
    corpus: &ParallelCorpus,
) -> Result<CleanOptions, String> {
    let mut opts = CleanOptions {
        whole_dup: false,
        internal_dup: false,
        overlong: false,
        side: parse_side(side, corpus)?,
        min_dup_len,
        max_len,
        dup_action: if drop_dups {
            Action::Dropped
        } else {
            Action::Repaired
        },
        ..CleanOptions::default()
    };
    for pattern in patterns.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match pattern {
            "whole" => opts.whole_dup = true,
            "internal" => opts.internal_dup = true,
            "overlong" => opts.overlong = true,
            other => return Err(format!("unknown pattern {other:?}")),
        }
    }
    Ok(opts)
}

fn load_corpus_binding(stage: &StageDecl) -> Result<(ParallelCorpus, bool), String> {
    if let Some(tsv) = stage.inputs.get("tsv") {
        return Ok((load_parallel_tsv(tsv).map_err(|e| e.to_string())?, true));
    }
    let src = require(stage, "input", "src")?;
    let tgt = require(stage, "input", "tgt")?;
    Ok((load_parallel(src, tgt).map_err(|e| e.to_string())?, false))
}

fn write_corpus_binding(
    corpus: &ParallelCorpus,
    stage: &StageDecl,
    as_tsv: bool,
) -> Result<(), String> {
    if as_tsv {
        let path = require(stage, "output", "tsv")?;
        write_parallel_tsv(corpus, path).map_err(|e| e.to_string())
    } else {
        let src = require(stage, "output", "src")?;
        let tgt = require(stage, "output", "tgt")?;
        write_parallel(corpus, src, tgt).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CleanParams {
    #[serde(default = "default_side")]
    side: String,
    #[serde(default = "default_patterns")]
    patterns: String,
    #[serde(default = "default_max_len")]
    max_len: usize,
    #[serde(default = "default_min_dup_len")]
    min_dup_len: usize,
    #[serde(default)]
    drop_dups: bool,
}

fn default_side() -> String {
    "source".to_string()
}
fn default_patterns() -> String {
    "whole,internal,overlong".to_string()
}
fn default_max_len() -> usize {
    80
}
fn default_min_dup_len() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LmTrainParams {
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_smoothing")]
    smoothing: String,
    #[serde(default)]
    unk: bool,
}

fn default_order() -> usize {
    3
}
fn default_smoothing() -> String {
    "kn".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MineParams {
    threshold: Option<f64>,
    #[serde(default = "default_gap")]
    gap: f64,
}

fn default_gap() -> f64 {
    0.49
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectParams {
    keep: Option<f64>,
    #[serde(default = "default_sample")]
    sample: usize,
    #[serde(default = "default_select_order")]
    order: usize,
    #[serde(default)]
    monolingual: bool,
}

fn default_sample() -> usize {
    150_000
}
fn default_select_order() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreParams {
    #[serde(default = "default_metrics")]
    metrics: String,
    #[serde(default)]
    lc: bool,
}

fn default_metrics() -> String {
    "bleu,nist,ter,meteor".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

fn execute_stage(stage: &StageDecl, seed: u64) -> Result<(), String> {
    match stage.name.as_str() {
        "clean" => {
            let params: CleanParams = parse_params(&stage.params)?;
            let (corpus, as_tsv) = load_corpus_binding(stage)?;
            let opts = clean_options(
                &params.side,
                &params.patterns,
                params.max_len,
                params.min_dup_len,
                params.drop_dups,
                &corpus,
            )?;
            let (cleaned, reports, _) = clean_corpus(&corpus, &opts);
            write_corpus_binding(&cleaned, stage, as_tsv)?;
            if let Some(report_path) = stage.outputs.get("report") {
                write_atomic(Path::new(report_path), reports_to_tsv(&reports).as_bytes())
                    .map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        "lm-train" => {
            let params: LmTrainParams = parse_params(&stage.params)?;
            let corpus = load_mono(require(stage, "input", "corpus")?).map_err(|e| e.to_string())?;
            let smoothing = Smoothing::parse(&params.smoothing)
                .ok_or_else(|| format!("unknown smoothing {:?}", params.smoothing))?;
            let opts = TrainOptions {
                order: params.order,
                smoothing,
                map_singletons_to_unk: params.unk,
            };
            let model = NGramModel::train_with(&corpus, &opts).map_err(|e| e.to_string())?;
            write_arpa(&model, require(stage, "output", "model")?).map_err(|e| e.to_string())
        }
        "ppl" => {
            let _params: EmptyParams = parse_params(&stage.params)?;
            let model = read_arpa(require(stage, "input", "model")?).map_err(|e| e.to_string())?;
            let eval = load_mono(require(stage, "input", "eval")?).map_err(|e| e.to_string())?;
            let report = model.perplexity(&eval).map_err(|e| e.to_string())?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_atomic(Path::new(require(stage, "output", "report")?), json.as_bytes())
                .map_err(|e| e.to_string())
        }
        "train-classifier" => {
            let _params: EmptyParams = parse_params(&stage.params)?;
            let positives =
                load_parallel_tsv(require(stage, "input", "positives")?).map_err(|e| e.to_string())?;
            let negatives = match stage.inputs.get("negatives") {
                Some(path) => load_parallel_tsv(path).map_err(|e| e.to_string())?.segments,
                None => Vec::new(),
            };
            let (dict, _) = ProbDictionary::load_tsv(require(stage, "input", "dict")?)
                .map_err(|e| e.to_string())?;
            let (model, meta) = train_classifier(&positives.segments, &negatives, &dict, seed)
                .map_err(|e| e.to_string())?;
            save_model(&model, &meta, require(stage, "output", "model")?)
                .map_err(|e| e.to_string())
        }
        "mine" => {
            let params: MineParams = parse_params(&stage.params)?;
            let threshold = params
                .threshold
                .ok_or("the similarity threshold is a required mining parameter")?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(format!("threshold must lie in [0,1], got {threshold}"));
            }
            let model = load_model(require(stage, "input", "model")?).map_err(|e| e.to_string())?;
            let (dict, _) = ProbDictionary::load_tsv(require(stage, "input", "dict")?)
                .map_err(|e| e.to_string())?;
            let pairs_file = require(stage, "input", "pairs")?;
            let listing = std::fs::read_to_string(pairs_file)
                .map_err(|e| format!("cannot read {pairs_file}: {e}"))?;
            let mut documents = Vec::new();
            for (lineno, line) in listing.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let (a_path, b_path) = line
                    .split_once('\t')
                    .ok_or_else(|| format!("{pairs_file}:{}: expected docA\\tdocB", lineno + 1))?;
                documents.push((
                    load_mono(a_path.trim()).map_err(|e| e.to_string())?,
                    load_mono(b_path.trim()).map_err(|e| e.to_string())?,
                ));
            }
            let mined = mine_documents(&documents, &model, &dict, threshold, params.gap);
            let corpus = ParallelCorpus::new(mined, "src", "tgt");
            write_parallel_tsv(&corpus, require(stage, "output", "out")?)
                .map_err(|e| e.to_string())
        }
        "select" => {
            let params: SelectParams = parse_params(&stage.params)?;
            let keep = params
                .keep
                .ok_or("the keep ratio is a required selection parameter")?;
            let in_domain = load_parallel_tsv(require(stage, "input", "in_domain")?)
                .map_err(|e| e.to_string())?;
            let general =
                load_parallel_tsv(require(stage, "input", "general")?).map_err(|e| e.to_string())?;
            let cfg = SelectionConfig {
                in_domain_sample_size: params.sample,
                keep_ratio: keep,
                lm_order: params.order,
                bilingual: !params.monolingual,
            };
            let models =
                train_selection_models(&in_domain, &general, &cfg, seed).map_err(|e| e.to_string())?;
            let (selected, ranked) = select(&general, &cfg, &models).map_err(|e| e.to_string())?;
            write_parallel_tsv(&selected, require(stage, "output", "out")?)
                .map_err(|e| e.to_string())?;
            if let Some(scores_path) = stage.outputs.get("scores") {
                let mut out = String::from("segment_index\tscore\n");
                for (i, r) in ranked.iter().enumerate() {
                    out.push_str(&format!("{i}\t{:.6}\n", r.score));
                }
                write_atomic(Path::new(scores_path), out.as_bytes()).map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        "score" => {
            let params: ScoreParams = parse_params(&stage.params)?;
            let mut hyp = load_mono(require(stage, "input", "hyp")?).map_err(|e| e.to_string())?;
            let mut refs = Vec::new();
            for path in binding_paths(require(stage, "input", "refs")?) {
                refs.push(load_mono(&path).map_err(|e| e.to_string())?);
            }
            if params.lc {
                hyp = lowercase_document(&hyp);
                refs = refs.iter().map(lowercase_document).collect();
            }
            let metrics: Vec<Metric> = params
                .metrics
                .split(',')
                .map(|m| Metric::parse(m).ok_or_else(|| format!("unknown metric {m:?}")))
                .collect::<Result<_, _>>()?;
            let reports = score_all(&hyp, &refs, &metrics).map_err(|e| e.to_string())?;
            let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            write_atomic(Path::new(require(stage, "output", "json")?), json.as_bytes())
                .map_err(|e| e.to_string())
        }
        "restore" => {
            let _params: EmptyParams = parse_params(&stage.params)?;
            let orig_path = require(stage, "input", "orig")?;
            let lemma_path = require(stage, "input", "lemma")?;
            let orig = std::fs::read_to_string(orig_path)
                .map_err(|e| format!("cannot read {orig_path}: {e}"))?;
            let lemma = std::fs::read_to_string(lemma_path)
                .map_err(|e| format!("cannot read {lemma_path}: {e}"))?;
            let orig_lines: Vec<&str> = orig.lines().map(|l| l.trim_end_matches('\r')).collect();
            let lemma_lines: Vec<&str> = lemma.lines().map(|l| l.trim_end_matches('\r')).collect();
            if orig_lines.len() != lemma_lines.len() {
                return Err(format!(
                    "line count mismatch: {orig_path} has {}, {lemma_path} has {}",
                    orig_lines.len(),
                    lemma_lines.len()
                ));
            }
            let mut out = String::new();
            for (o, l) in orig_lines.iter().zip(&lemma_lines) {
                out.push_str(&restore(&tokenize(o), &tokenize(l)).detokenized());
                out.push('\n');
            }
            write_atomic(Path::new(require(stage, "output", "out")?), out.as_bytes())
                .map_err(|e| e.to_string())
        }
        other => Err(format!("unknown stage {other:?}")),
    }
}
