//! Corpus engineering toolkit for statistical MT data preparation:
//! corruption repair, comparable-corpus parallel-sentence mining, n-gram
//! language models with perplexity scoring, cross-entropy data selection,
//! lemmatizer-output restoration, and translation quality metrics.

pub mod cleaner;
pub mod corpus;
pub mod lm;
pub mod metrics;
pub mod miner;
pub mod pipeline;
pub mod restorer;
pub mod selector;
pub mod util;

pub use corpus::{tokenize, BiSegment, Casing, Document, ParallelCorpus, Sentence, Token};
