//! ARPA text format: `\data\` header with per-order counts, one
//! `\N-grams:` section per order (log10 probability, n-gram, optional log10
//! backoff weight), closed by `\end\`.
//!
//! A comment line written before the header records the smoothing method so
//! models round-trip with their lookup semantics intact; files from other
//! toolkits load fine without it.

use std::path::Path;

use super::{LmError, NGramModel, Smoothing, BOS_LOG10, MAX_ORDER};

/// Serialize a trained model. Entries are written in lexicographic n-gram
/// order so output is deterministic.
pub fn write_arpa(model: &NGramModel, path: impl AsRef<Path>) -> Result<(), LmError> {
    let path = path.as_ref();
    let order = model.order();
    let probs = model.sections();
    let backoffs = model.backoff_sections();

    let mut sections: Vec<Vec<String>> = Vec::with_capacity(order);
    for n in 1..=order {
        let mut keys: Vec<&[u32]> = probs[n - 1].keys().map(|k| &k[..]).collect();
        // Backoff-bearing contexts of length n always have a probability
        // entry too; the union is defensive.
        if n < order {
            for key in backoffs[n - 1].keys() {
                if !probs[n - 1].contains_key(&key[..]) {
                    keys.push(key);
                }
            }
        }
        keys.sort_by(|a, b| model.resolve_ids(a).cmp(&model.resolve_ids(b)));
        keys.dedup();
        let mut lines = Vec::with_capacity(keys.len());
        for key in keys {
            let words = model.resolve_ids(key).join(" ");
            let lp = probs[n - 1].get(key).copied().unwrap_or(BOS_LOG10);
            let mut line = format!("{lp:.7}\t{words}");
            if n < order {
                if let Some(bo) = backoffs[n - 1].get(key) {
                    line.push_str(&format!("\t{bo:.7}"));
                }
            }
            lines.push(line);
        }
        sections.push(lines);
    }

    let mut out = String::new();
    if let Some(smoothing) = model.smoothing() {
        out.push_str(&format!("# smoothing: {}\n\n", smoothing.as_str()));
    }
    out.push_str("\\data\\\n");
    for (i, lines) in sections.iter().enumerate() {
        out.push_str(&format!("ngram {}={}\n", i + 1, lines.len()));
    }
    for (i, lines) in sections.iter().enumerate() {
        out.push_str(&format!("\n\\{}-grams:\n", i + 1));
        for line in lines {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    crate::util::write_atomic(path, out.as_bytes()).map_err(|source| LmError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a model from an ARPA file.
pub fn read_arpa(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| LmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parse_err = |line: usize, message: String| LmError::ArpaParse {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut smoothing: Option<Smoothing> = None;
    let mut declared: Vec<(usize, usize)> = Vec::new();
    let mut lines = content.lines().enumerate().peekable();

    // Preamble: free text until \data\; pick up our smoothing tag if present.
    let mut saw_data = false;
    for (i, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed == "\\data\\" {
            saw_data = true;
            break;
        }
        if let Some(rest) = trimmed.strip_prefix("# smoothing:") {
            smoothing = Smoothing::parse(rest.trim());
            if smoothing.is_none() {
                return Err(parse_err(i + 1, format!("unknown smoothing tag {rest:?}")));
            }
        }
    }
    if !saw_data {
        return Err(parse_err(0, "missing \\data\\ header".to_string()));
    }

    // Count declarations.
    while let Some(&(i, line)) = lines.peek() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        if trimmed.starts_with('\\') {
            break;
        }
        let rest = trimmed
            .strip_prefix("ngram ")
            .ok_or_else(|| parse_err(i + 1, format!("expected 'ngram N=K', got {trimmed:?}")))?;
        let (n, k) = rest
            .split_once('=')
            .ok_or_else(|| parse_err(i + 1, format!("expected 'ngram N=K', got {trimmed:?}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad n-gram order {n:?}")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad n-gram count {k:?}")))?;
        if !(1..=MAX_ORDER).contains(&n) {
            return Err(parse_err(i + 1, format!("order {n} out of range")));
        }
        declared.push((n, k));
        lines.next();
    }
    if declared.is_empty() {
        return Err(parse_err(0, "no n-gram counts declared".to_string()));
    }
    let order = declared.iter().map(|&(n, _)| n).max().unwrap();

    let mut probs: Vec<Vec<(Vec<String>, f64)>> = vec![Vec::new(); order];
    let mut backoffs: Vec<Vec<(Vec<String>, f64)>> = vec![Vec::new(); order.saturating_sub(1)];
    let mut vocab_words: Vec<String> = Vec::new();
    let mut saw_end = false;

    while let Some((i, line)) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "\\end\\" {
            saw_end = true;
            break;
        }
        let section = trimmed
            .strip_prefix('\\')
            .and_then(|s| s.strip_suffix("-grams:"))
            .ok_or_else(|| parse_err(i + 1, format!("expected section header, got {trimmed:?}")))?;
        let n: usize = section
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad section header {trimmed:?}")))?;
        if n < 1 || n > order {
            return Err(parse_err(i + 1, format!("section \\{n}-grams: exceeds declared order {order}")));
        }
        // Entries until the next blank line or section marker.
        while let Some(&(j, entry)) = lines.peek() {
            let entry = entry.trim();
            if entry.is_empty() || entry.starts_with('\\') {
                break;
            }
            lines.next();
            let fields: Vec<&str> = entry.split_whitespace().collect();
            let (has_backoff, expected) = if fields.len() == n + 2 {
                (true, n + 2)
            } else if fields.len() == n + 1 {
                (false, n + 1)
            } else {
                return Err(parse_err(
                    j + 1,
                    format!("expected {} or {} fields in \\{n}-grams:, got {}", n + 1, n + 2, fields.len()),
                ));
            };
            let lp: f64 = fields[0]
                .parse()
                .map_err(|_| parse_err(j + 1, format!("bad log10 probability {:?}", fields[0])))?;
            let words: Vec<String> = fields[1..n + 1].iter().map(|s| s.to_string()).collect();
            if n == 1 {
                vocab_words.push(words[0].clone());
            }
            if has_backoff {
                if n >= order {
                    return Err(parse_err(
                        j + 1,
                        "backoff weight on a highest-order n-gram".to_string(),
                    ));
                }
                let bo: f64 = fields[expected - 1]
                    .parse()
                    .map_err(|_| parse_err(j + 1, format!("bad backoff weight {:?}", fields[expected - 1])))?;
                backoffs[n - 1].push((words.clone(), bo));
            }
            probs[n - 1].push((words, lp));
        }
    }
    if !saw_end {
        return Err(parse_err(0, "missing \\end\\ marker".to_string()));
    }

    for &(n, k) in &declared {
        let found = probs[n - 1].len();
        if found != k {
            return Err(LmError::ArpaCountMismatch {
                path: path.display().to_string(),
                n,
                declared: k,
                found,
            });
        }
    }

    Ok(NGramModel::from_arpa_parts(
        order,
        smoothing,
        vocab_words,
        probs,
        backoffs,
    ))
}
