//! Per-stage cache manifests.
//!
//! A stage directory holds `manifest.json` with a key (hash of the stage's
//! configuration and input files) and the hash of every output file. A stage
//! is skipped only when the key matches and every output still hashes to
//! the recorded value.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    key: String,
    outputs: BTreeMap<String, String>,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> io::Result<String> {
    Ok(hash_bytes(&fs::read(path)?))
}

/// Hash of a serializable settings value together with the contents of
/// `inputs`.
pub fn stage_key<T: Serialize>(settings: &T, inputs: &[&Path]) -> io::Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(settings).map_err(io::Error::other)?);
    for p in inputs {
        h.update(hash_file(p)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Every file below `dir` except the manifest, as sorted relative paths.
fn output_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry?;
        let rel = entry.path().strip_prefix(dir).map_err(io::Error::other)?;
        if entry.file_type().is_file() && rel != Path::new(MANIFEST) {
            out.push(rel.to_path_buf());
        }
    }
    out.sort();
    Ok(out)
}

fn rel_key(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Whether `dir` holds intact outputs produced under `key`.
pub fn is_fresh(dir: &Path, key: &str) -> bool {
    let Ok(text) = fs::read(dir.join(MANIFEST)) else {
        return false;
    };
    let Ok(m) = serde_json::from_slice::<Manifest>(&text) else {
        log::warn!("{}: unreadable cache manifest, re-running", dir.display());
        return false;
    };
    if m.key != key {
        return false;
    }
    let Ok(files) = output_files(dir) else {
        return false;
    };
    if files.iter().map(|p| rel_key(p)).ne(m.outputs.keys().cloned()) {
        log::warn!("{}: output files changed since the cached run, re-running", dir.display());
        return false;
    }
    let intact = m.outputs.iter().all(|(rel, hash)| hash_file(&dir.join(rel)).is_ok_and(|h| &h == hash));
    if !intact {
        log::warn!("{}: cached output does not match its recorded hash, re-running", dir.display());
    }
    intact
}

/// Records the current outputs of `dir` under `key`.
pub fn record(dir: &Path, key: &str) -> io::Result<()> {
    let mut outputs = BTreeMap::new();
    for rel in output_files(dir)? {
        outputs.insert(rel_key(&rel), hash_file(&dir.join(&rel))?);
    }
    let m = Manifest { key: key.to_string(), outputs };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&m).map_err(io::Error::other)?)
}
