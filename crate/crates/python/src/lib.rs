//! Python bindings for the forge corpus toolkit: tokenization, corpus
//! cleaning, n-gram language models, similarity-based mining, data
//! selection, restoration, metrics, and the recipe runner.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use forge_core::cleaner;
use forge_core::corpus::{tokenize as core_tokenize, BiSegment, Document, Sentence};
use forge_core::lm::{self, NGramModel as CoreModel, Smoothing, TrainOptions};
use forge_core::metrics;
use forge_core::miner;
use forge_core::pipeline;
use forge_core::restorer;
use forge_core::selector;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type StringPairs = Vec<(String, String)>;

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => (*b).into_pyobject(py)?.to_owned().into_any().unbind(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .into_any()
                    .unbind()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn to_py_report<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(value_err)?;
    json_to_py(py, &json)
}

fn sentence_of(text: &str) -> Sentence {
    core_tokenize(text)
}

fn document_of(lines: Vec<String>, id: &str) -> Document {
    Document::new(
        id,
        lines
            .iter()
            .filter(|l| !l.trim().is_empty())
            .map(|l| sentence_of(l))
            .collect(),
    )
}

fn corpus_of(pairs: &[(String, String)]) -> forge_core::ParallelCorpus {
    forge_core::ParallelCorpus::new(
        pairs
            .iter()
            .map(|(s, t)| BiSegment::new(sentence_of(s), sentence_of(t)))
            .collect(),
        "src",
        "tgt",
    )
}

/// Split one line into token surfaces.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    sentence_of(text)
        .tokens
        .into_iter()
        .map(|t| t.surface)
        .collect()
}

/// Repair duplication corruption in one sentence; returns the repaired
/// text and the list of detected pattern names.
#[pyfunction]
#[pyo3(signature = (text, min_dup_len = 3))]
fn clean_sentence(text: &str, min_dup_len: usize) -> (String, Vec<String>) {
    let mut current = sentence_of(text);
    let mut patterns = Vec::new();
    for _ in 0..10 {
        let report = cleaner::detect_whole_dup(&current)
            .or_else(|| cleaner::detect_internal_dup(&current, min_dup_len));
        match report {
            Some(r) => {
                patterns.push(r.pattern.as_str().to_string());
                current = r.repaired;
            }
            None => break,
        }
    }
    (current.detokenized(), patterns)
}

/// Clean a list of (source, target) pairs; returns the surviving pairs and
/// one report dict per action.
#[pyfunction]
#[pyo3(signature = (pairs, side = "source", min_dup_len = 3, max_len = 80))]
fn clean_pairs(
    py: Python<'_>,
    pairs: StringPairs,
    side: &str,
    min_dup_len: usize,
    max_len: usize,
) -> PyResult<(StringPairs, Py<PyAny>)> {
    let corpus = corpus_of(&pairs);
    let opts = pipeline::clean_options(
        side,
        "whole,internal,overlong",
        max_len,
        min_dup_len,
        false,
        &corpus,
    )
    .map_err(value_err)?;
    let (cleaned, reports, _) = cleaner::clean_corpus(&corpus, &opts);
    let out: Vec<(String, String)> = cleaned
        .segments
        .iter()
        .map(|seg| (seg.source.detokenized(), seg.target.detokenized()))
        .collect();
    let report_list = PyList::empty(py);
    for r in &reports {
        let dict = PyDict::new(py);
        dict.set_item("segment_index", r.segment_index)?;
        dict.set_item("pattern", r.pattern.as_str())?;
        dict.set_item("span", (r.span.start, r.span.end))?;
        dict.set_item("action", r.action.as_str())?;
        report_list.append(dict)?;
    }
    Ok((out, report_list.into_any().unbind()))
}

/// A trained backoff n-gram language model.
#[pyclass(name = "NGramModel")]
struct PyNGramModel {
    inner: CoreModel,
}

#[pymethods]
impl PyNGramModel {
    /// Train on sentence strings. `smoothing` is "kn", "wb", or "mle".
    #[staticmethod]
    #[pyo3(signature = (sentences, order = 3, smoothing = "kn", unk = false))]
    fn train(sentences: Vec<String>, order: usize, smoothing: &str, unk: bool) -> PyResult<Self> {
        let smoothing = Smoothing::parse(smoothing)
            .ok_or_else(|| value_err(format!("unknown smoothing {smoothing:?}")))?;
        let opts = TrainOptions {
            order,
            smoothing,
            map_singletons_to_unk: unk,
        };
        let doc = document_of(sentences, "train");
        let inner = CoreModel::train_with(&doc, &opts).map_err(value_err)?;
        Ok(PyNGramModel { inner })
    }

    #[staticmethod]
    fn read_arpa(path: &str) -> PyResult<Self> {
        Ok(PyNGramModel {
            inner: lm::read_arpa(path).map_err(value_err)?,
        })
    }

    fn write_arpa(&self, path: &str) -> PyResult<()> {
        lm::write_arpa(&self.inner, path).map_err(value_err)
    }

    fn order(&self) -> usize {
        self.inner.order()
    }

    /// P(word | context) in linear space.
    #[pyo3(signature = (context, word))]
    fn word_prob(&self, context: Vec<String>, word: &str) -> f64 {
        let ctx: Vec<&str> = context.iter().map(|s| s.as_str()).collect();
        self.inner.word_prob(&ctx, word)
    }

    /// Cross-entropy of one sentence in bits per token (plus `</s>`).
    fn cross_entropy(&self, sentence: &str) -> f64 {
        self.inner.cross_entropy(&sentence_of(sentence))
    }

    /// Perplexity report over evaluation sentences.
    fn perplexity(&self, py: Python<'_>, sentences: Vec<String>) -> PyResult<Py<PyAny>> {
        let report = self
            .inner
            .perplexity(&document_of(sentences, "eval"))
            .map_err(value_err)?;
        to_py_report(py, &report)
    }
}

/// A similarity classifier bundled with its dictionary, ready to mine.
#[pyclass(name = "SimilarityModel")]
struct PySimilarityModel {
    model: miner::SimilarityModel,
    meta: Option<miner::TrainingMeta>,
    dict: miner::ProbDictionary,
}

impl PySimilarityModel {
    fn build_dict(entries: Vec<(String, String, f64)>) -> miner::ProbDictionary {
        miner::ProbDictionary::from_entries(entries.into_iter().map(|(s, t, p)| ((s, t), p)))
    }
}

#[pymethods]
impl PySimilarityModel {
    /// Train from positive (and optionally negative) sentence pairs with a
    /// probabilistic dictionary given as (source, target, prob) triples.
    #[staticmethod]
    #[pyo3(signature = (positives, dict, negatives = Vec::new(), seed = 42))]
    fn train(
        positives: Vec<(String, String)>,
        dict: Vec<(String, String, f64)>,
        negatives: Vec<(String, String)>,
        seed: u64,
    ) -> PyResult<Self> {
        let dict = Self::build_dict(dict);
        let pos = corpus_of(&positives).segments;
        let neg = corpus_of(&negatives).segments;
        let (model, meta) = miner::train_classifier(&pos, &neg, &dict, seed).map_err(value_err)?;
        Ok(PySimilarityModel {
            model,
            meta: Some(meta),
            dict,
        })
    }

    #[staticmethod]
    fn load(path: &str, dict: Vec<(String, String, f64)>) -> PyResult<Self> {
        Ok(PySimilarityModel {
            model: miner::load_model(path).map_err(value_err)?,
            meta: None,
            dict: Self::build_dict(dict),
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let meta = self
            .meta
            .clone()
            .ok_or_else(|| value_err("model was loaded, not trained; nothing to save"))?;
        miner::save_model(&self.model, &meta, path).map_err(value_err)
    }

    /// Calibrated likelihood that two sentences are translations.
    fn likelihood(&self, source: &str, target: &str) -> f64 {
        let f = miner::featurize(&sentence_of(source), &sentence_of(target), &self.dict, 0.0, 0.0);
        self.model.likelihood(&f)
    }

    /// Mine parallel sentences from two comparable documents; returns
    /// (source, target, score) triples.
    #[pyo3(signature = (doc_a, doc_b, threshold, gap = 0.49))]
    fn mine(
        &self,
        doc_a: Vec<String>,
        doc_b: Vec<String>,
        threshold: f64,
        gap: f64,
    ) -> PyResult<Vec<(String, String, f64)>> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(value_err("threshold must lie in [0,1]"));
        }
        let a = document_of(doc_a, "a");
        let b = document_of(doc_b, "b");
        let segments = miner::mine(&a, &b, &self.model, &self.dict, threshold, gap);
        Ok(segments
            .into_iter()
            .map(|seg| {
                (
                    seg.source.detokenized(),
                    seg.target.detokenized(),
                    seg.score.unwrap_or(0.0),
                )
            })
            .collect())
    }
}

/// Score a hypothesis against references; returns one report dict per
/// requested metric.
#[pyfunction]
#[pyo3(signature = (hyp, refs, metrics = "bleu,nist,ter,meteor", lowercase = false))]
fn score(
    py: Python<'_>,
    hyp: Vec<String>,
    refs: Vec<Vec<String>>,
    metrics: &str,
    lowercase: bool,
) -> PyResult<Py<PyAny>> {
    let mut hyp_doc = document_of(hyp, "hyp");
    let mut ref_docs: Vec<Document> = refs
        .into_iter()
        .enumerate()
        .map(|(i, lines)| document_of(lines, &format!("ref{i}")))
        .collect();
    if lowercase {
        hyp_doc = metrics::lowercase_document(&hyp_doc);
        ref_docs = ref_docs.iter().map(metrics::lowercase_document).collect();
    }
    let wanted: Vec<metrics::Metric> = metrics
        .split(',')
        .map(|m| {
            metrics::Metric::parse(m).ok_or_else(|| value_err(format!("unknown metric {m:?}")))
        })
        .collect::<PyResult<_>>()?;
    let reports = metrics::score_all(&hyp_doc, &ref_docs, &wanted).map_err(value_err)?;
    to_py_report(py, &reports)
}

/// Modified Moore-Lewis selection over (source, target) pairs; returns the
/// kept pairs and every segment's score.
#[pyfunction]
#[pyo3(signature = (in_domain, general, keep_ratio, sample = 150_000, order = 3, seed = 42, bilingual = true))]
#[allow(clippy::too_many_arguments)]
fn mml_select(
    in_domain: StringPairs,
    general: StringPairs,
    keep_ratio: f64,
    sample: usize,
    order: usize,
    seed: u64,
    bilingual: bool,
) -> PyResult<(StringPairs, Vec<f64>)> {
    let in_corpus = corpus_of(&in_domain);
    let general_corpus = corpus_of(&general);
    let cfg = selector::SelectionConfig {
        in_domain_sample_size: sample,
        keep_ratio,
        lm_order: order,
        bilingual,
    };
    let models =
        selector::train_selection_models(&in_corpus, &general_corpus, &cfg, seed).map_err(value_err)?;
    let (kept, ranked) = selector::select(&general_corpus, &cfg, &models).map_err(value_err)?;
    Ok((
        kept.segments
            .iter()
            .map(|seg| (seg.source.detokenized(), seg.target.detokenized()))
            .collect(),
        ranked.iter().map(|r| r.score).collect(),
    ))
}

/// Restore casing, punctuation, and dropped tokens to one lemmatized line.
#[pyfunction]
fn restore(orig: &str, lemma: &str) -> String {
    restorer::restore(&sentence_of(orig), &sentence_of(lemma)).detokenized()
}

/// Line-parallel restoration over whole files' worth of text.
#[pyfunction]
fn restore_lines(orig: Vec<String>, lemma: Vec<String>) -> PyResult<Vec<String>> {
    if orig.len() != lemma.len() {
        return Err(value_err(format!(
            "line count mismatch: {} vs {}",
            orig.len(),
            lemma.len()
        )));
    }
    Ok(orig
        .iter()
        .zip(&lemma)
        .map(|(o, l)| restorer::restore(&sentence_of(o), &sentence_of(l)).detokenized())
        .collect())
}

/// Execute a recipe file; returns the manifest as a dict.
#[pyfunction]
#[pyo3(signature = (path, force = false))]
fn run_recipe(py: Python<'_>, path: &str, force: bool) -> PyResult<Py<PyAny>> {
    let manifest = pipeline::run_recipe(path, force).map_err(value_err)?;
    to_py_report(py, &manifest)
}

#[pymodule]
fn corpusforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(clean_sentence, m)?)?;
    m.add_function(wrap_pyfunction!(clean_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(mml_select, m)?)?;
    m.add_function(wrap_pyfunction!(restore, m)?)?;
    m.add_function(wrap_pyfunction!(restore_lines, m)?)?;
    m.add_function(wrap_pyfunction!(run_recipe, m)?)?;
    m.add_class::<PyNGramModel>()?;
    m.add_class::<PySimilarityModel>()?;
    Ok(())
}
