//! Subject-project adapter: method and test discovery, isolated test
//! execution, and the per-test coverage map that establishes the reach
//! condition.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use stubscope_lang::ast::{Item, Span};
use stubscope_lang::project::{function_id, method_id};
use stubscope_lang::{Project, TypeName};

use crate::config::{ExecutionConfig, PathFilter};
use crate::error::{Error, Result};
use crate::persist::sha256_hex;
use crate::runner::{RunnerOutcome, TraceRecord, OUTCOME_FAIL, OUTCOME_PASS};
use crate::spawn::run_with_timeout;

pub type MethodId = String;
pub type TestId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnCategory {
    Void,
    Boolean,
    IntegerLike,
    FloatLike,
    Character,
    StringLike,
    Reference,
    ArrayLike,
    /// No annotation and no dynamic evidence yet.
    Unknown,
}

impl ReturnCategory {
    pub fn from_type(t: &TypeName) -> ReturnCategory {
        match t {
            TypeName::Void => ReturnCategory::Void,
            TypeName::Bool => ReturnCategory::Boolean,
            TypeName::Int => ReturnCategory::IntegerLike,
            TypeName::Float => ReturnCategory::FloatLike,
            TypeName::Char => ReturnCategory::Character,
            TypeName::Str => ReturnCategory::StringLike,
            TypeName::List => ReturnCategory::ArrayLike,
            TypeName::Class(_) => ReturnCategory::Reference,
        }
    }

    /// Map a runtime value-kind tag (as recorded by the tracer) to the
    /// category it implies.
    pub fn from_runtime_kind(kind: &str) -> Option<ReturnCategory> {
        Some(match kind {
            "int" => ReturnCategory::IntegerLike,
            "float" => ReturnCategory::FloatLike,
            "bool" => ReturnCategory::Boolean,
            "char" => ReturnCategory::Character,
            "str" => ReturnCategory::StringLike,
            "list" => ReturnCategory::ArrayLike,
            "object" | "null" => ReturnCategory::Reference,
            "void" => ReturnCategory::Void,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    ExternallyInvokable,
    InternalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDescriptor {
    /// Stable key: relative file path + qualified name + arity.
    pub id: MethodId,
    pub file: String,
    pub name: String,
    /// Qualified container: the class name, or the file stem for top-level
    /// functions.
    pub declaring_scope: String,
    pub arity: usize,
    /// Whole declaration.
    pub span: Span,
    /// The braced body, the region a transformation replaces.
    pub body_span: Span,
    pub return_category: ReturnCategory,
    pub is_static: bool,
    pub visibility: Visibility,
    pub is_constructor: bool,
    /// Digest of the declaring file, to detect source drift before splicing.
    pub file_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteStatus {
    Pass,
    Fail,
    Flaky,
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: TestId,
    pub file: String,
    pub span: Span,
    pub suite_status_on_original: SuiteStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileErrorRecord {
    pub file: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct MethodDiscovery {
    pub methods: Vec<MethodDescriptor>,
    pub errors: Vec<FileErrorRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestOutcomeKind {
    Pass,
    Fail,
    Error,
    Timeout,
}

impl TestOutcomeKind {
    pub fn is_pass(self) -> bool {
        self == TestOutcomeKind::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: TestId,
    pub outcome: TestOutcomeKind,
    pub duration_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct TestRunReport {
    pub results: Vec<TestResult>,
    /// Set when a runner crashed before reporting; the report is then
    /// incomplete and the campaign must not silently continue.
    pub incomplete: Option<String>,
}

impl TestRunReport {
    pub fn all_pass(&self) -> bool {
        self.incomplete.is_none() && self.results.iter().all(|r| r.outcome.is_pass())
    }

    pub fn non_passing(&self) -> Vec<&TestResult> {
        self.results
            .iter()
            .filter(|r| !r.outcome.is_pass())
            .collect()
    }
}

/// Coverage plus runtime dynamics, built from per-test trace records.
#[derive(Debug, Clone, Default)]
pub struct CoverageData {
    pub traces: Vec<TraceRecord>,
    /// method id -> tests that executed it. Methods executed by no test are
    /// absent by construction.
    pub map: BTreeMap<MethodId, BTreeSet<TestId>>,
}

impl CoverageData {
    pub fn from_traces(traces: Vec<TraceRecord>) -> CoverageData {
        let mut map: BTreeMap<MethodId, BTreeSet<TestId>> = BTreeMap::new();
        for t in &traces {
            map.entry(t.method_id.clone())
                .or_default()
                .insert(t.test_id.clone());
        }
        CoverageData { traces, map }
    }

    pub fn covering_tests(&self, method: &str) -> BTreeSet<TestId> {
        self.map.get(method).cloned().unwrap_or_default()
    }

    pub fn dynamics(&self, test: &str, method: &str) -> Option<&TraceRecord> {
        self.traces
            .iter()
            .find(|t| t.test_id == test && t.method_id == method)
    }

    /// Distinct runtime kinds returned by `method` across all covering
    /// tests; feeds dynamic return-category inference.
    pub fn returned_kinds(&self, method: &str) -> BTreeSet<String> {
        self.traces
            .iter()
            .filter(|t| t.method_id == method)
            .flat_map(|t| t.returned_kinds.iter().cloned())
            .collect()
    }
}

/// Extra outputs requested from a test run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub traced: bool,
    /// Collect observation records, stamped with this run index.
    pub observe_run_index: Option<u32>,
}

/// Everything one batch of test executions produced.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub report: TestRunReport,
    pub traces: Vec<TraceRecord>,
    pub observations: Vec<crate::runner::ObsLogRecord>,
}

pub struct ProjectAdapter {
    pub root: PathBuf,
    pub exec: ExecutionConfig,
}

impl ProjectAdapter {
    pub fn new(root: impl Into<PathBuf>, exec: ExecutionConfig) -> ProjectAdapter {
        ProjectAdapter {
            root: root.into(),
            exec,
        }
    }

    pub fn load_project(&self) -> Result<Project> {
        Project::load(&self.root).map_err(|e| Error::io(self.root.display().to_string(), e))
    }

    fn filter(&self) -> PathFilter {
        PathFilter::new(&self.exec.include, &self.exec.exclude)
    }

    /// All non-test methods and functions with resolvable body spans, in a
    /// deterministic order, plus per-file parse-error records.
    pub fn discover_methods(&self) -> Result<MethodDiscovery> {
        let project = self.load_project()?;
        let mut discovery = discover_methods_in(&project, &self.filter());
        stamp_file_digests(&self.root, &mut discovery.methods)?;
        Ok(discovery)
    }

    pub fn discover_tests(&self) -> Result<(Vec<TestCase>, Vec<FileErrorRecord>)> {
        let project = self.load_project()?;
        let filter = self.filter();
        let mut tests: Vec<TestCase> = project
            .tests
            .values()
            .filter(|t| filter.admits(&t.file))
            .map(|t| TestCase {
                id: t.id.clone(),
                file: t.file.clone(),
                span: t.decl.span,
                suite_status_on_original: SuiteStatus::Unverified,
            })
            .collect();
        tests.sort_by(|a, b| a.id.cmp(&b.id));
        let errors = file_errors(&project);
        Ok((tests, errors))
    }

    /// Run tests in `workspace` (each in a fresh child process). `filter`
    /// selects a subset by id; ids that do not exist in the workspace are a
    /// hard error.
    pub fn run_tests(
        &self,
        workspace: &Path,
        filter: Option<&BTreeSet<TestId>>,
        options: &RunOptions,
    ) -> Result<RunArtifacts> {
        let project =
            Project::load(workspace).map_err(|e| Error::io(workspace.display().to_string(), e))?;
        let known: BTreeSet<TestId> = project.tests.keys().cloned().collect();
        let selected: Vec<TestId> = match filter {
            Some(wanted) => {
                for id in wanted {
                    if !known.contains(id) {
                        return Err(Error::UnknownTest(id.clone()));
                    }
                }
                wanted.iter().cloned().collect()
            }
            None => known.into_iter().collect(),
        };

        let runner_prefix = self.exec.resolved_runner()?;
        let scratch = tempfile::Builder::new()
            .prefix("stubscope-run-")
            .tempdir()
            .map_err(|e| Error::io("tempdir", e))?;

        let mut artifacts = RunArtifacts::default();
        for (i, test_id) in selected.iter().enumerate() {
            let outcome_path = scratch.path().join(format!("outcome-{i}.json"));
            let trace_path = scratch.path().join(format!("trace-{i}.jsonl"));
            let obs_path = scratch.path().join(format!("obs-{i}.jsonl"));
            let mut cmd = runner_prefix.clone();
            cmd.extend([
                "--project".to_string(),
                workspace.display().to_string(),
                "--test".to_string(),
                test_id.clone(),
                "--outcome-out".to_string(),
                outcome_path.display().to_string(),
            ]);
            if options.traced {
                cmd.extend(["--trace-out".to_string(), trace_path.display().to_string()]);
            }
            if let Some(run_index) = options.observe_run_index {
                cmd.extend([
                    "--obs-out".to_string(),
                    obs_path.display().to_string(),
                    "--run-index".to_string(),
                    run_index.to_string(),
                ]);
            }

            let spawn = run_with_timeout(&cmd, self.exec.timeout)?;
            let duration_ms = spawn.duration.as_millis() as u64;
            if spawn.timed_out {
                artifacts.report.results.push(TestResult {
                    test_id: test_id.clone(),
                    outcome: TestOutcomeKind::Timeout,
                    duration_ms,
                    message: Some(format!("timed out after {:?}", self.exec.timeout)),
                });
                continue;
            }
            let outcome: Option<RunnerOutcome> = std::fs::read_to_string(&outcome_path)
                .ok()
                .and_then(|text| serde_json::from_str(&text).ok());
            match outcome {
                Some(outcome) => {
                    let kind = match outcome.outcome.as_str() {
                        OUTCOME_PASS => TestOutcomeKind::Pass,
                        OUTCOME_FAIL => TestOutcomeKind::Fail,
                        _ => TestOutcomeKind::Error,
                    };
                    artifacts.report.results.push(TestResult {
                        test_id: test_id.clone(),
                        outcome: kind,
                        duration_ms,
                        message: outcome.message,
                    });
                }
                None => {
                    artifacts.report.incomplete = Some(format!(
                        "runner for `{test_id}` exited with {:?} without reporting an outcome",
                        spawn.exit_code
                    ));
                    artifacts.report.results.push(TestResult {
                        test_id: test_id.clone(),
                        outcome: TestOutcomeKind::Error,
                        duration_ms,
                        message: Some("runner crash".into()),
                    });
                    continue;
                }
            }
            if options.traced && trace_path.is_file() {
                artifacts
                    .traces
                    .extend(crate::persist::read_jsonl::<TraceRecord>(&trace_path)?);
            }
            if options.observe_run_index.is_some() && obs_path.is_file() {
                artifacts.observations.extend(crate::persist::read_jsonl::<
                    crate::runner::ObsLogRecord,
                >(&obs_path)?);
            }
        }
        Ok(artifacts)
    }

    /// Execute every passing test once with tracing and build the coverage
    /// map. Callers must have verified the suite is green first.
    pub fn compute_coverage(
        &self,
        workspace: &Path,
        tests: &BTreeSet<TestId>,
    ) -> Result<CoverageData> {
        let artifacts = self.run_tests(
            workspace,
            Some(tests),
            &RunOptions {
                traced: true,
                observe_run_index: None,
            },
        )?;
        if let Some(reason) = &artifacts.report.incomplete {
            return Err(Error::Coverage(reason.clone()));
        }
        if !artifacts.report.all_pass() {
            let failing: Vec<String> = artifacts
                .report
                .non_passing()
                .iter()
                .map(|r| r.test_id.clone())
                .collect();
            return Err(Error::Coverage(format!(
                "tests failed during coverage collection: {}",
                failing.join(", ")
            )));
        }
        Ok(CoverageData::from_traces(artifacts.traces))
    }
}

fn file_errors(project: &Project) -> Vec<FileErrorRecord> {
    project
        .errors
        .iter()
        .map(|e| FileErrorRecord {
            file: e.file().to_string(),
            message: e.to_string(),
        })
        .collect()
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Discovery over an already-loaded project (used by the engine on
/// transformed and instrumented workspaces too).
pub fn discover_methods_in(project: &Project, filter: &PathFilter) -> MethodDiscovery {
    let mut methods = Vec::new();
    for file in &project.files {
        if file.path.starts_with("tests/") || !filter.admits(&file.path) {
            continue;
        }
        for item in &file.items {
            match item {
                Item::Class(class) => {
                    if let Some(ctor) = &class.ctor {
                        methods.push(MethodDescriptor {
                            id: method_id(
                                &file.path,
                                &class.name,
                                "constructor",
                                ctor.params.len(),
                            ),
                            file: file.path.clone(),
                            name: "constructor".into(),
                            declaring_scope: class.name.clone(),
                            arity: ctor.params.len(),
                            span: ctor.span,
                            body_span: ctor.body.span,
                            return_category: ReturnCategory::Void,
                            is_static: false,
                            visibility: Visibility::ExternallyInvokable,
                            is_constructor: true,
                            file_digest: String::new(),
                        });
                    }
                    for m in &class.methods {
                        methods.push(MethodDescriptor {
                            id: method_id(&file.path, &class.name, &m.name, m.params.len()),
                            file: file.path.clone(),
                            name: m.name.clone(),
                            declaring_scope: class.name.clone(),
                            arity: m.params.len(),
                            span: m.span,
                            body_span: m.body.span,
                            return_category: m
                                .return_type
                                .as_ref()
                                .map(ReturnCategory::from_type)
                                .unwrap_or(ReturnCategory::Unknown),
                            is_static: false,
                            visibility: if m.private {
                                Visibility::InternalOnly
                            } else {
                                Visibility::ExternallyInvokable
                            },
                            is_constructor: false,
                            file_digest: String::new(),
                        });
                    }
                }
                Item::Fn(f) => {
                    methods.push(MethodDescriptor {
                        id: function_id(&file.path, &f.name, f.params.len()),
                        file: file.path.clone(),
                        name: f.name.clone(),
                        declaring_scope: file_stem(&file.path),
                        arity: f.params.len(),
                        span: f.span,
                        body_span: f.body.span,
                        return_category: f
                            .return_type
                            .as_ref()
                            .map(ReturnCategory::from_type)
                            .unwrap_or(ReturnCategory::Unknown),
                        is_static: true,
                        visibility: if f.private {
                            Visibility::InternalOnly
                        } else {
                            Visibility::ExternallyInvokable
                        },
                        is_constructor: false,
                        file_digest: String::new(),
                    });
                }
                Item::Test(_) => {}
            }
        }
    }
    methods.sort_by(|a, b| a.id.cmp(&b.id));
    MethodDiscovery {
        methods,
        errors: file_errors(project),
    }
}

/// Fill in `file_digest` for each descriptor from the on-disk content.
pub fn stamp_file_digests(root: &Path, methods: &mut [MethodDescriptor]) -> Result<()> {
    let mut cache: BTreeMap<String, String> = BTreeMap::new();
    for m in methods {
        if !cache.contains_key(&m.file) {
            let path = root.join(&m.file);
            let bytes =
                std::fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            cache.insert(m.file.clone(), sha256_hex(&bytes));
        }
        m.file_digest = cache[&m.file].clone();
    }
    Ok(())
}
