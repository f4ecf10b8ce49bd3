//! Artifact persistence: line-delimited JSON records, atomic writes and
//! content hashing of source trees. Every pipeline stage communicates with
//! the next one only through these files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Write `bytes` to `path` atomically: temp file in the same directory,
/// then rename over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        std::process::id()
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(bytes)
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.sync_all().ok();
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Serialize records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).map_err(|e| Error::Record {
            path: path.display().to_string(),
            message: e.to_string(),
        })?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(|e| Error::Record {
            path: origin.to_string(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(records)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Record {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Record {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Digest of a source tree: every file under the given sub-directories of
/// `root`, hashed as (relative path, length, bytes) in sorted order.
pub fn hash_tree(root: &Path, subdirs: &[&str]) -> Result<String> {
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for sub in subdirs {
        let base = root.join(sub);
        if !base.exists() {
            continue;
        }
        for entry in walkdir::WalkDir::new(&base).sort_by_file_name() {
            let entry =
                entry.map_err(|e| Error::Subject(format!("walking {}: {e}", base.display())))?;
            if entry.file_type().is_file() {
                let rel = entry
                    .path()
                    .strip_prefix(root)
                    .unwrap_or(entry.path())
                    .to_string_lossy()
                    .replace('\\', "/");
                files.push((rel, entry.path().to_path_buf()));
            }
        }
    }
    files.sort();
    let mut hasher = Sha256::new();
    for (rel, path) in files {
        let bytes = fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        hasher.update(rel.as_bytes());
        hasher.update(bytes.len().to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Copy the runnable parts of a subject project (sources, tests, config
/// file) into `dst`, which must not exist yet.
pub fn copy_project(src_root: &Path, dst_root: &Path) -> Result<()> {
    fs::create_dir_all(dst_root).map_err(|e| Error::io(dst_root.display().to_string(), e))?;
    for sub in [stubscope_lang::SRC_DIR, stubscope_lang::TESTS_DIR] {
        let from = src_root.join(sub);
        if !from.is_dir() {
            continue;
        }
        for entry in walkdir::WalkDir::new(&from).sort_by_file_name() {
            let entry =
                entry.map_err(|e| Error::Subject(format!("walking {}: {e}", from.display())))?;
            let rel = entry.path().strip_prefix(src_root).expect("under root");
            let target = dst_root.join(rel);
            if entry.file_type().is_dir() {
                fs::create_dir_all(&target)
                    .map_err(|e| Error::io(target.display().to_string(), e))?;
            } else {
                fs::copy(entry.path(), &target)
                    .map_err(|e| Error::io(target.display().to_string(), e))?;
            }
        }
    }
    let config = src_root.join(crate::config::CONFIG_FILE);
    if config.is_file() {
        fs::copy(&config, dst_root.join(crate::config::CONFIG_FILE))
            .map_err(|e| Error::io(config.display().to_string(), e))?;
    }
    Ok(())
}

/// Filesystem-safe identifier: alphanumerics kept, everything else folded
/// to `_`, plus a short content hash to keep distinct ids distinct.
pub fn slug(id: &str) -> String {
    let mut cleaned: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.len() > 80 {
        cleaned.truncate(80);
    }
    format!("{cleaned}-{}", &sha256_hex(id.as_bytes())[..8])
}
