//! Core text data model: tokens, sentences, documents, and aligned corpora,
//! plus the rule-based tokenizer and the line-oriented loaders every other
//! module consumes.
//!
//! Inputs are plain UTF-8 text, one sentence per line. Parallel corpora are
//! either two sibling files with equal line counts or a single TSV with one
//! tab per line. All text is normalized to Unicode NFC on ingestion.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Punctuation characters the tokenizer detaches into standalone tokens.
pub const PUNCT_CHARS: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '"', '„', '”', '«', '»', '-',
];

/// Errors raised while reading corpus files.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { path: String, offset: usize },
    #[error("line count mismatch: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines}")]
    LineCountMismatch {
        src_path: String,
        tgt_path: String,
        src_lines: usize,
        tgt_lines: usize,
    },
    #[error("{path}:{line}: blank line in parallel input would misalign segment pairs")]
    BlankLine { path: String, line: usize },
    #[error("{path}:{line}: expected 1 tab (or 2 with a trailing score), found {tabs}")]
    TsvShape {
        path: String,
        line: usize,
        tabs: usize,
    },
    #[error("{path}:{line}: cannot parse score field {value:?}")]
    BadScore {
        path: String,
        line: usize,
        value: String,
    },
}

/// Casing pattern of a token, derivable from its surface form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Casing {
    Lower,
    Capitalized,
    Upper,
    Mixed,
}

impl Casing {
    /// Derive the casing pattern from a surface form. Tokens without
    /// alphabetic characters (numbers, punctuation) count as `Lower`.
    /// A single capital letter is `Capitalized`, not `Upper`.
    pub fn of(surface: &str) -> Casing {
        let cased: Vec<char> = surface.chars().filter(|c| c.is_alphabetic()).collect();
        if cased.is_empty() {
            return Casing::Lower;
        }
        if cased.iter().all(|c| c.is_lowercase()) {
            return Casing::Lower;
        }
        let first_upper = cased[0].is_uppercase();
        let rest_lower = cased[1..].iter().all(|c| c.is_lowercase());
        if first_upper && rest_lower {
            Casing::Capitalized
        } else if cased.iter().all(|c| c.is_uppercase()) {
            Casing::Upper
        } else {
            Casing::Mixed
        }
    }

    /// Apply this pattern to another surface form. `Mixed` cannot be applied
    /// without the original token; callers with a source token at hand should
    /// use [`recase`] instead.
    pub fn apply(self, surface: &str) -> String {
        match self {
            Casing::Lower => surface.to_lowercase(),
            Casing::Upper => surface.to_uppercase(),
            Casing::Capitalized => {
                // The pattern is defined over alphabetic characters: the
                // first letter goes up, the rest down, digits and
                // punctuation pass through.
                let mut first_letter_done = false;
                let mut out = String::with_capacity(surface.len());
                for c in surface.chars() {
                    if c.is_alphabetic() && !first_letter_done {
                        first_letter_done = true;
                        out.extend(c.to_uppercase());
                    } else {
                        out.extend(c.to_lowercase());
                    }
                }
                out
            }
            // Without the donor token all we can do is leave the form alone.
            Casing::Mixed => surface.to_string(),
        }
    }
}

/// Transfer the casing of `donor` onto `surface`. Mixed-case donors transfer
/// per character up to the shorter length; the remainder is lowercased.
pub fn recase(surface: &str, donor: &Token) -> String {
    match donor.casing {
        Casing::Mixed => {
            let donor_chars: Vec<char> = donor.surface.chars().collect();
            surface
                .chars()
                .enumerate()
                .flat_map(|(i, c)| {
                    let upper = donor_chars.get(i).map(|d| d.is_uppercase()).unwrap_or(false);
                    if upper {
                        c.to_uppercase().collect::<Vec<char>>()
                    } else {
                        c.to_lowercase().collect::<Vec<char>>()
                    }
                })
                .collect()
        }
        pattern => pattern.apply(surface),
    }
}

/// A single token: a whitespace-free surface form plus its casing pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Token {
    pub surface: String,
    pub casing: Casing,
}

impl Token {
    /// Build a token from a surface form, deriving the casing pattern.
    /// The surface must be non-empty and contain no whitespace.
    pub fn new(surface: impl Into<String>) -> Token {
        let surface = surface.into();
        debug_assert!(!surface.is_empty(), "token surface must be non-empty");
        debug_assert!(
            !surface.chars().any(char::is_whitespace),
            "token surface must not contain whitespace: {surface:?}"
        );
        let casing = Casing::of(&surface);
        Token { surface, casing }
    }

    pub fn is_punctuation(&self) -> bool {
        !self.surface.is_empty() && self.surface.chars().all(|c| PUNCT_CHARS.contains(&c))
    }

    pub fn is_numeric(&self) -> bool {
        self.surface.chars().any(|c| c.is_ascii_digit())
            && self
                .surface
                .chars()
                .all(|c| c.is_ascii_digit() || PUNCT_CHARS.contains(&c))
    }

    /// True when no character is alphabetic (covers punctuation, numbers,
    /// symbols - everything a lemmatizer would drop as a non-word).
    pub fn is_non_alphabetic(&self) -> bool {
        !self.surface.chars().any(|c| c.is_alphabetic())
    }
}

/// An ordered token list plus the original line it came from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub raw: String,
}

impl Sentence {
    pub fn from_tokens(tokens: Vec<Token>) -> Sentence {
        let raw = tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Sentence { tokens, raw }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Join token surfaces with single spaces.
    pub fn detokenized(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

/// An ordered list of sentences read from one file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(id: impl Into<String>, sentences: Vec<Sentence>) -> Document {
        Document {
            id: id.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// An aligned sentence pair, optionally carrying a quality score in [0,1].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BiSegment {
    pub source: Sentence,
    pub target: Sentence,
    pub score: Option<f64>,
}

impl BiSegment {
    pub fn new(source: Sentence, target: Sentence) -> BiSegment {
        BiSegment {
            source,
            target,
            score: None,
        }
    }

    pub fn scored(source: Sentence, target: Sentence, score: f64) -> BiSegment {
        debug_assert!(
            (0.0..=1.0).contains(&score),
            "segment score must lie in [0,1], got {score}"
        );
        BiSegment {
            source,
            target,
            score: Some(score),
        }
    }
}

/// A sentence-aligned corpus: one [`BiSegment`] per line pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParallelCorpus {
    pub segments: Vec<BiSegment>,
    pub source_lang: String,
    pub target_lang: String,
}

impl ParallelCorpus {
    pub fn new(
        segments: Vec<BiSegment>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
    ) -> ParallelCorpus {
        ParallelCorpus {
            segments,
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn source_document(&self, id: impl Into<String>) -> Document {
        Document::new(
            id,
            self.segments.iter().map(|s| s.source.clone()).collect(),
        )
    }

    pub fn target_document(&self, id: impl Into<String>) -> Document {
        Document::new(
            id,
            self.segments.iter().map(|s| s.target.clone()).collect(),
        )
    }
}

fn is_punct(c: char) -> bool {
    PUNCT_CHARS.contains(&c)
}

/// Split one line of text into tokens.
///
/// Rules: split on whitespace, then detach every punctuation character in
/// [`PUNCT_CHARS`] as its own token unless it sits between two digits
/// ("0,8" and "1.5" stay intact). Text is normalized to NFC first.
pub fn tokenize(text: &str) -> Sentence {
    let normalized: String = text.nfc().collect();
    let mut tokens = Vec::new();
    for chunk in normalized.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let inside_number = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_ascii_digit()
                && chars[i + 1].is_ascii_digit();
            if is_punct(c) && !inside_number {
                if !current.is_empty() {
                    tokens.push(Token::new(std::mem::take(&mut current)));
                }
                tokens.push(Token::new(c.to_string()));
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(Token::new(current));
        }
    }
    Sentence {
        tokens,
        raw: normalized,
    }
}

fn read_utf8(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| IngestError::InvalidUtf8 {
        path: path.display().to_string(),
        offset: e.utf8_error().valid_up_to(),
    })
}

fn split_lines(content: &str) -> Vec<&str> {
    content.lines().map(|l| l.trim_end_matches('\r')).collect()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn lang_tag(path: &Path) -> String {
    path.extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "src".to_string())
}

/// Load a monolingual file: one sentence per non-empty line, order preserved.
pub fn load_mono(path: impl AsRef<Path>) -> Result<Document, IngestError> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    let sentences = split_lines(&content)
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(tokenize)
        .collect();
    Ok(Document::new(file_stem(path), sentences))
}

/// Load a parallel corpus from two sibling files with equal line counts.
/// Blank lines are an error here: they would silently misalign the pairing.
pub fn load_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<ParallelCorpus, IngestError> {
    let (src_path, tgt_path) = (src_path.as_ref(), tgt_path.as_ref());
    let src_content = read_utf8(src_path)?;
    let tgt_content = read_utf8(tgt_path)?;
    let src_lines = split_lines(&src_content);
    let tgt_lines = split_lines(&tgt_content);
    if src_lines.len() != tgt_lines.len() {
        return Err(IngestError::LineCountMismatch {
            src_path: src_path.display().to_string(),
            tgt_path: tgt_path.display().to_string(),
            src_lines: src_lines.len(),
            tgt_lines: tgt_lines.len(),
        });
    }
    for (lines, path) in [(&src_lines, src_path), (&tgt_lines, tgt_path)] {
        if let Some(i) = lines.iter().position(|l| l.trim().is_empty()) {
            return Err(IngestError::BlankLine {
                path: path.display().to_string(),
                line: i + 1,
            });
        }
    }
    let segments = src_lines
        .iter()
        .zip(tgt_lines.iter())
        .map(|(s, t)| BiSegment::new(tokenize(s), tokenize(t)))
        .collect();
    Ok(ParallelCorpus::new(
        segments,
        lang_tag(src_path),
        lang_tag(tgt_path),
    ))
}

/// Load a parallel corpus from a single TSV: `source \t target` per line,
/// optionally `source \t target \t score` for corpora produced by mining.
pub fn load_parallel_tsv(path: impl AsRef<Path>) -> Result<ParallelCorpus, IngestError> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    let mut segments = Vec::new();
    for (i, line) in split_lines(&content).iter().enumerate() {
        if line.trim().is_empty() {
            return Err(IngestError::BlankLine {
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.len() {
            2 => segments.push(BiSegment::new(tokenize(fields[0]), tokenize(fields[1]))),
            3 => {
                let score: f64 =
                    fields[2]
                        .parse()
                        .map_err(|_| IngestError::BadScore {
                            path: path.display().to_string(),
                            line: i + 1,
                            value: fields[2].to_string(),
                        })?;
                segments.push(BiSegment::scored(
                    tokenize(fields[0]),
                    tokenize(fields[1]),
                    score.clamp(0.0, 1.0),
                ));
            }
            n => {
                return Err(IngestError::TsvShape {
                    path: path.display().to_string(),
                    line: i + 1,
                    tabs: n - 1,
                })
            }
        }
    }
    Ok(ParallelCorpus::new(segments, "src", "tgt"))
}

/// Serialize a corpus back to two sibling files, one raw line per segment.
pub fn write_parallel(
    corpus: &ParallelCorpus,
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> std::io::Result<()> {
    let mut src = String::new();
    let mut tgt = String::new();
    for seg in &corpus.segments {
        src.push_str(&seg.source.raw);
        src.push('\n');
        tgt.push_str(&seg.target.raw);
        tgt.push('\n');
    }
    crate::util::write_atomic(src_path.as_ref(), src.as_bytes())?;
    crate::util::write_atomic(tgt_path.as_ref(), tgt.as_bytes())?;
    Ok(())
}

/// Serialize a corpus as TSV. Scores are written as a third column when
/// present on every segment.
pub fn write_parallel_tsv(
    corpus: &ParallelCorpus,
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    let all_scored = !corpus.segments.is_empty() && corpus.segments.iter().all(|s| s.score.is_some());
    let mut out = String::new();
    for seg in &corpus.segments {
        out.push_str(&seg.source.raw);
        out.push('\t');
        out.push_str(&seg.target.raw);
        if all_scored {
            out.push('\t');
            out.push_str(&format!("{:.6}", seg.score.unwrap()));
        }
        out.push('\n');
    }
    crate::util::write_atomic(path.as_ref(), out.as_bytes())
}

/// Count token frequencies over a document, used by corruption statistics.
pub fn token_counts(doc: &Document) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for sentence in &doc.sentences {
        for token in &sentence.tokens {
            *counts.entry(token.surface.clone()).or_insert(0) += 1;
        }
    }
    counts
}
