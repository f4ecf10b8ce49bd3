//! Shared plumbing for the integration suites: fixture lookup and campaign
//! configurations wired to the `minirun` subject runner built alongside
//! these tests.

use std::path::{Path, PathBuf};

use stubscope_core::CampaignConfig;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .expect("fixtures dir")
}

pub fn fixture(name: &str) -> PathBuf {
    let dir = fixtures_dir().join(name);
    assert!(dir.is_dir(), "missing fixture {name}");
    dir
}

pub fn runner_command() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_minirun").to_string()]
}

/// Campaign configuration pointing at `project`, writing artifacts under
/// `out`, executing subjects through the dedicated runner binary. Rapid
/// defaults; tests override `runs`/`verify_runs` when fidelity matters.
pub fn config(project: &Path, out: &Path) -> CampaignConfig {
    let mut config = CampaignConfig::new(project);
    config.out_dir = out.to_path_buf();
    config.runner_command = runner_command();
    config.runs = 3;
    config.verify_runs = 1;
    config.workers = 2;
    config.timeout_secs = 10;
    config
}

/// Write a scratch subject project from `(path, contents)` pairs.
pub fn write_project(root: &Path, files: &[(&str, &str)]) {
    for (rel, text) in files {
        let path = root.join(rel);
        std::fs::create_dir_all(path.parent().expect("parent")).expect("mkdir");
        std::fs::write(path, text).expect("write");
    }
}

/// Copy a fixture into a scratch directory so tests can mutate it freely.
pub fn copy_fixture(name: &str, into: &Path) -> PathBuf {
    let src = fixture(name);
    let dst = into.join(name);
    copy_tree(&src, &dst);
    dst
}

fn copy_tree(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).expect("mkdir");
    for entry in walkdir(src) {
        let rel = entry.strip_prefix(src).expect("under src");
        let target = dst.join(rel);
        if entry.is_dir() {
            std::fs::create_dir_all(&target).expect("mkdir");
        } else {
            std::fs::create_dir_all(target.parent().expect("parent")).expect("mkdir");
            std::fs::copy(&entry, &target).expect("copy");
        }
    }
}

fn walkdir(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("read_dir") {
            let path = entry.expect("entry").path();
            out.push(path.clone());
            if path.is_dir() {
                stack.push(path);
            }
        }
    }
    out
}
