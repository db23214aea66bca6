//! Probabilistic 1-gram translation dictionary, loadable from a TSV or
//! extracted from a phrase table by keeping the single-token entries.

use std::collections::HashMap;
use std::path::Path;

use crate::miner::MinerError;

/// Map from (source word, target word) to translation probability in (0,1].
/// Per-source probabilities sum to at most 1 (within 1e-6).
#[derive(Debug, Clone, Default)]
pub struct ProbDictionary {
    entries: HashMap<(String, String), f64>,
}

/// Outcome of a dictionary load: malformed lines are skipped, not fatal.
#[derive(Debug, Clone, Copy, Default)]
pub struct DictStats {
    pub entries: usize,
    pub skipped: usize,
}

impl ProbDictionary {
    pub fn from_entries(entries: impl IntoIterator<Item = ((String, String), f64)>) -> Self {
        let mut dict = ProbDictionary {
            entries: entries.into_iter().collect(),
        };
        dict.renormalize();
        dict
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, source: &str, target: &str) -> Option<f64> {
        self.entries
            .get(&(source.to_string(), target.to_string()))
            .copied()
    }

    /// Scale any source word whose probabilities exceed 1 back onto the
    /// simplex.
    fn renormalize(&mut self) {
        let mut sums: HashMap<&str, f64> = HashMap::new();
        for ((s, _), p) in &self.entries {
            *sums.entry(s.as_str()).or_insert(0.0) += *p;
        }
        let over: HashMap<String, f64> = sums
            .into_iter()
            .filter(|&(_, sum)| sum > 1.0 + 1e-6)
            .map(|(s, sum)| (s.to_string(), sum))
            .collect();
        if over.is_empty() {
            return;
        }
        for ((s, _), p) in self.entries.iter_mut() {
            if let Some(sum) = over.get(s) {
                *p /= sum;
            }
        }
    }

    /// Load `source \t target \t probability` lines. Malformed lines are
    /// counted and skipped.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<(Self, DictStats), MinerError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|source| MinerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = HashMap::new();
        let mut skipped = 0usize;
        for line in content.lines() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = (fields.len() == 3)
                .then(|| fields[2].parse::<f64>().ok())
                .flatten()
                .filter(|p| p.is_finite() && *p > 0.0);
            match parsed {
                Some(p) => {
                    entries.insert((fields[0].to_string(), fields[1].to_string()), p.min(1.0));
                }
                None => skipped += 1,
            }
        }
        let dict = ProbDictionary::from_entries(entries);
        let stats = DictStats {
            entries: dict.len(),
            skipped,
        };
        Ok((dict, stats))
    }

    /// Serialize as a sorted TSV.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), MinerError> {
        let path = path.as_ref();
        let mut rows: Vec<(&(String, String), &f64)> = self.entries.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for ((s, t), p) in rows {
            out.push_str(&format!("{s}\t{t}\t{p:.6}\n"));
        }
        crate::util::write_atomic(path, out.as_bytes()).map_err(|source| MinerError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Extract a 1-gram dictionary from a phrase table in the standard text
/// layout `src ||| tgt ||| p1 p2 p3 p4 ...`. Only single-token source and
/// target entries are kept; the probability comes from `prob_field`
/// (0-based; the default 2 is the direct phrase translation probability of
/// the usual 4-score layout). Conventions differ across toolkit versions,
/// so the field is overridable.
pub fn extract_dictionary(
    path: impl AsRef<Path>,
    prob_field: usize,
) -> Result<(ProbDictionary, DictStats), MinerError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| MinerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = HashMap::new();
    let mut skipped = 0usize;
    for line in content.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() < 3 {
            skipped += 1;
            continue;
        }
        let (src, tgt) = (fields[0], fields[1]);
        if src.split_whitespace().count() != 1 || tgt.split_whitespace().count() != 1 {
            // Multi-word phrases are not 1-grams; skipping them is the
            // point, not an error.
            continue;
        }
        let scores: Vec<&str> = fields[2].split_whitespace().collect();
        let parsed = scores
            .get(prob_field)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|p| p.is_finite() && *p > 0.0);
        match parsed {
            Some(p) => {
                entries.insert((src.to_string(), tgt.to_string()), p.min(1.0));
            }
            None => skipped += 1,
        }
    }
    let dict = ProbDictionary::from_entries(entries);
    let stats = DictStats {
        entries: dict.len(),
        skipped,
    };
    Ok((dict, stats))
}

pub const DEFAULT_PROB_FIELD: usize = 2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_takes_third_score_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pt.txt");
        std::fs::write(
            &p,
            "kot ||| cat ||| 0.8 0.5 0.7 0.4\n\
             na pewno ||| for sure ||| 0.9 0.9 0.9 0.9\n\
             pies ||| dog ||| 0.6 0.1 0.9 0.2\n",
        )
        .unwrap();
        let (dict, stats) = extract_dictionary(&p, DEFAULT_PROB_FIELD).unwrap();
        assert_eq!(dict.prob("kot", "cat"), Some(0.7));
        assert_eq!(dict.prob("pies", "dog"), Some(0.9));
        assert_eq!(dict.prob("na pewno", "for sure"), None);
        assert_eq!(dict.len(), 2);
        assert_eq!(stats.skipped, 0);
    }

    #[test]
    fn malformed_lines_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pt.txt");
        std::fs::write(&p, "garbage line\nkot ||| cat ||| not-a-number\n").unwrap();
        let (dict, stats) = extract_dictionary(&p, DEFAULT_PROB_FIELD).unwrap();
        assert!(dict.is_empty());
        assert_eq!(stats.skipped, 2);
    }

    #[test]
    fn empty_file_gives_empty_dictionary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pt.txt");
        std::fs::write(&p, "").unwrap();
        let (dict, stats) = extract_dictionary(&p, DEFAULT_PROB_FIELD).unwrap();
        assert!(dict.is_empty());
        assert_eq!(stats.entries, 0);
    }

    #[test]
    fn per_source_mass_renormalizes() {
        let dict = ProbDictionary::from_entries([
            (("kot".to_string(), "cat".to_string()), 0.9),
            (("kot".to_string(), "kitty".to_string()), 0.9),
            (("pies".to_string(), "dog".to_string()), 0.5),
        ]);
        let total = dict.prob("kot", "cat").unwrap() + dict.prob("kot", "kitty").unwrap();
        assert!(total <= 1.0 + 1e-6);
        assert_eq!(dict.prob("pies", "dog"), Some(0.5));
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dict.tsv");
        let dict = ProbDictionary::from_entries([
            (("kot".to_string(), "cat".to_string()), 0.7),
            (("pies".to_string(), "dog".to_string()), 0.4),
        ]);
        dict.write_tsv(&p).unwrap();
        let (loaded, stats) = ProbDictionary::load_tsv(&p).unwrap();
        assert_eq!(stats.entries, 2);
        assert_eq!(stats.skipped, 0);
        assert!((loaded.prob("kot", "cat").unwrap() - 0.7).abs() < 1e-9);
    }
}
