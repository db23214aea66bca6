//! Small shared helpers: atomic file writes, deterministic float reduction,
//! content hashing, and seed fan-out.

use std::path::Path;

use sha2::{Digest, Sha256};

/// Write `bytes` to `path` atomically: write a sibling temp file, then rename.
/// A killed process never leaves a partially written destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().unwrap_or_default().to_string_lossy(),
            std::process::id()
        )),
        None => Path::new(&format!(
            ".{}.tmp{}",
            path.display(),
            std::process::id()
        ))
        .to_path_buf(),
    };
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Sum floats by pairwise reduction: deterministic for a fixed input order
/// and far better conditioned than a running left fold on long inputs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Derive a stage-local seed from a pipeline seed and a stage label, so one
/// recipe-level seed fans out to independent deterministic streams.
pub fn fan_out_seed(root_seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
