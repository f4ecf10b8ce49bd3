//! Campaign and execution configuration. A `stubscope.toml` at the subject
//! project root provides defaults; CLI flags override it.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "stubscope.toml";
pub const DEFAULT_OUT_DIR: &str = ".stubscope";
pub const DEFAULT_RUNS: u32 = 10;
pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_VERIFY_RUNS: u32 = 3;

/// Which diagnosis stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageSelection {
    Infection,
    Propagation,
    All,
}

impl std::str::FromStr for StageSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "infection" => Ok(StageSelection::Infection),
            "propagation" => Ok(StageSelection::Propagation),
            "all" => Ok(StageSelection::All),
            other => Err(format!(
                "unknown stage `{other}` (expected infection, propagation or all)"
            )),
        }
    }
}

/// How subject tests are executed: the runner command prefix, the per-test
/// timeout and the source file filters.
#[derive(Debug, Clone)]
pub struct ExecutionConfig {
    /// Command prefix the runner arguments are appended to. Empty means
    /// "current executable with the internal runner marker".
    pub runner_command: Vec<String>,
    pub timeout: Duration,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
}

pub const RUNNER_MARKER: &str = "__run-subject";
pub const RUNNER_ENV: &str = "STUBSCOPE_RUNNER";

impl ExecutionConfig {
    /// Resolve the actual command prefix: explicit configuration first,
    /// then the environment override, then self-execution.
    pub fn resolved_runner(&self) -> Result<Vec<String>> {
        if !self.runner_command.is_empty() {
            return Ok(self.runner_command.clone());
        }
        if let Ok(runner) = std::env::var(RUNNER_ENV) {
            if !runner.is_empty() {
                return Ok(vec![runner]);
            }
        }
        let exe = std::env::current_exe()
            .map_err(|e| Error::Config(format!("cannot locate current executable: {e}")))?;
        Ok(vec![exe.display().to_string(), RUNNER_MARKER.to_string()])
    }
}

/// Full configuration of one analysis campaign over one subject project.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub project_root: PathBuf,
    pub out_dir: PathBuf,
    /// N: observation repetitions per version for the nondeterminism filter.
    pub runs: u32,
    pub timeout_secs: u64,
    /// Repetitions of the original suite used to classify flaky tests.
    pub verify_runs: u32,
    pub workers: usize,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub stage: StageSelection,
    pub only: Option<Vec<String>>,
    pub runner_command: Vec<String>,
}

/// The optional `stubscope.toml` contents.
#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    runs: Option<u32>,
    timeout_secs: Option<u64>,
    verify_runs: Option<u32>,
    workers: Option<usize>,
    include: Option<Vec<String>>,
    exclude: Option<Vec<String>>,
    test_command: Option<Vec<String>>,
    out_dir: Option<String>,
}

impl CampaignConfig {
    pub fn new(project_root: impl Into<PathBuf>) -> CampaignConfig {
        let project_root = project_root.into();
        CampaignConfig {
            out_dir: project_root.join(DEFAULT_OUT_DIR),
            project_root,
            runs: DEFAULT_RUNS,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            verify_runs: DEFAULT_VERIFY_RUNS,
            workers: 1,
            include: Vec::new(),
            exclude: Vec::new(),
            stage: StageSelection::All,
            only: None,
            runner_command: Vec::new(),
        }
    }

    /// Defaults overlaid with the project's config file, when present.
    pub fn load(project_root: impl Into<PathBuf>) -> Result<CampaignConfig> {
        let mut config = CampaignConfig::new(project_root);
        let path = config.project_root.join(CONFIG_FILE);
        if !path.is_file() {
            return Ok(config);
        }
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(runs) = file.runs {
            config.runs = runs;
        }
        if let Some(timeout) = file.timeout_secs {
            config.timeout_secs = timeout;
        }
        if let Some(verify) = file.verify_runs {
            config.verify_runs = verify;
        }
        if let Some(workers) = file.workers {
            config.workers = workers;
        }
        if let Some(include) = file.include {
            config.include = include;
        }
        if let Some(exclude) = file.exclude {
            config.exclude = exclude;
        }
        if let Some(cmd) = file.test_command {
            config.runner_command = cmd;
        }
        if let Some(out) = file.out_dir {
            config.out_dir = config.project_root.join(out);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        if self.verify_runs < 1 {
            return Err(Error::Config("verify_runs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn exec_config(&self) -> ExecutionConfig {
        ExecutionConfig {
            runner_command: self.runner_command.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
            include: self.include.clone(),
            exclude: self.exclude.clone(),
        }
    }

    /// Hash of configuration facts that influence the transformation
    /// catalog; used for cache invalidation.
    pub fn catalog_config_hash(&self) -> String {
        let facts = format!(
            "timeout={};verify={};include={:?};exclude={:?};runner={:?}",
            self.timeout_secs, self.verify_runs, self.include, self.exclude, self.runner_command
        );
        crate::persist::sha256_hex(facts.as_bytes())
    }
}

/// Include/exclude filter over `/`-separated project-relative paths.
/// Supports `*` (within a segment), `**` (across segments) and `?`.
#[derive(Debug, Clone, Default)]
pub struct PathFilter {
    include: Vec<String>,
    exclude: Vec<String>,
}

impl PathFilter {
    pub fn new(include: &[String], exclude: &[String]) -> PathFilter {
        PathFilter {
            include: include.to_vec(),
            exclude: exclude.to_vec(),
        }
    }

    pub fn admits(&self, path: &str) -> bool {
        if !self.include.is_empty() && !self.include.iter().any(|p| glob_match(p, path)) {
            return false;
        }
        !self.exclude.iter().any(|p| glob_match(p, path))
    }
}

pub fn glob_match(pattern: &str, path: &str) -> bool {
    let pat: Vec<char> = pattern.chars().collect();
    let txt: Vec<char> = path.chars().collect();
    glob_rec(&pat, &txt)
}

fn glob_rec(pat: &[char], txt: &[char]) -> bool {
    if pat.is_empty() {
        return txt.is_empty();
    }
    if pat.len() >= 2 && pat[0] == '*' && pat[1] == '*' {
        // `**` may swallow any run of characters including separators; an
        // immediately following `/` is optional when it matches nothing.
        let rest = &pat[2..];
        let rest_no_slash = if rest.first() == Some(&'/') {
            &rest[1..]
        } else {
            rest
        };
        for split in 0..=txt.len() {
            if glob_rec(rest, &txt[split..]) || glob_rec(rest_no_slash, &txt[split..]) {
                return true;
            }
        }
        return false;
    }
    match pat[0] {
        '*' => (0..=txt.len())
            .take_while(|&i| i == 0 || txt[i - 1] != '/')
            .any(|i| glob_rec(&pat[1..], &txt[i..])),
        '?' => !txt.is_empty() && txt[0] != '/' && glob_rec(&pat[1..], &txt[1..]),
        c => !txt.is_empty() && txt[0] == c && glob_rec(&pat[1..], &txt[1..]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glob_star_stays_within_segment() {
        assert!(glob_match("src/*.mini", "src/a.mini"));
        assert!(!glob_match("src/*.mini", "src/sub/a.mini"));
        assert!(glob_match("src/**/*.mini", "src/sub/a.mini"));
        assert!(glob_match("src/**", "src/sub/deep/a.mini"));
        assert!(glob_match("**/vendored/**", "src/vendored/x.mini"));
        assert!(glob_match("src/?.mini", "src/a.mini"));
        assert!(!glob_match("src/?.mini", "src/ab.mini"));
    }

    #[test]
    fn filter_combines_include_and_exclude() {
        let f = PathFilter::new(&["src/**".into()], &["src/gen/**".into()]);
        assert!(f.admits("src/a.mini"));
        assert!(!f.admits("src/gen/b.mini"));
        assert!(!f.admits("tests/t.mini"));
        let open = PathFilter::default();
        assert!(open.admits("anything/x.mini"));
    }

    #[test]
    fn config_file_overlays_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(CONFIG_FILE),
            "runs = 4\ntimeout_secs = 7\nexclude = [\"src/gen/**\"]\n",
        )
        .unwrap();
        let config = CampaignConfig::load(dir.path()).unwrap();
        assert_eq!(config.runs, 4);
        assert_eq!(config.timeout_secs, 7);
        assert_eq!(config.exclude, vec!["src/gen/**".to_string()]);
        assert_eq!(config.verify_runs, DEFAULT_VERIFY_RUNS);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CONFIG_FILE), "runs = 0\n").unwrap();
        assert!(CampaignConfig::load(dir.path()).is_err());
    }
}
