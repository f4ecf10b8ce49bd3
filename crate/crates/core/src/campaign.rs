//! Campaign orchestration: `discover` builds the transformation catalog,
//! `diagnose` runs the two-stage analysis for undetected transformations,
//! `report` renders suggestions and statistics. Stages communicate only
//! through persisted artifacts; discovery is cached on a source-tree hash
//! and diagnosis resumes per transformation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use stubscope_lang::{SRC_DIR, TESTS_DIR};

use crate::adapter::{
    CoverageData, MethodDescriptor, MethodId, ProjectAdapter, ReturnCategory, RunOptions,
    SuiteStatus, TestCase, TestId, TestResult,
};
use crate::analytics::{self, CampaignSummary};
use crate::config::{CampaignConfig, PathFilter, StageSelection};
use crate::error::{Error, Result};
use crate::insight::{
    accessible_entry_points, build_call_graph, field_observers, measure_stack_distance,
    StackDistanceSample,
};
use crate::instrument::SiteInfo;
use crate::observe::InvariantRecord;
use crate::persist::{
    atomic_write, copy_project, hash_tree, read_json, read_jsonl, slug, write_json, write_jsonl,
};
use crate::rip::{AnalysisContext, AnalysisOutput, MethodAnalyzer, SymptomClass, SymptomDiagnosis};
use crate::suggest::{
    render_report, suggest_no_infection, suggest_no_propagation, suggest_weak_oracle, Suggestion,
    UnresolvedEntry,
};
use crate::transform::{
    apply_transformation, detect, enumerate_transformations, filter_trivial_methods, Detection,
    ExtremeTransformation, SkipReason, SkippedMethod,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub schema_version: u32,
    pub source_hash: String,
    pub config_hash: String,
}

/// Row of the diagnosis index file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub transformation_id: String,
    pub symptom: String,
    pub evidence_path: String,
}

/// All artifact locations under one output directory.
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub out: PathBuf,
}

impl ArtifactPaths {
    pub fn new(out: impl Into<PathBuf>) -> ArtifactPaths {
        ArtifactPaths { out: out.into() }
    }

    pub fn meta(&self) -> PathBuf {
        self.out.join("meta.json")
    }
    pub fn methods(&self) -> PathBuf {
        self.out.join("methods.jsonl")
    }
    pub fn file_errors(&self) -> PathBuf {
        self.out.join("file-errors.jsonl")
    }
    pub fn tests(&self) -> PathBuf {
        self.out.join("tests.jsonl")
    }
    pub fn test_report(&self) -> PathBuf {
        self.out.join("test-report.jsonl")
    }
    pub fn coverage(&self) -> PathBuf {
        self.out.join("coverage.jsonl")
    }
    pub fn skipped(&self) -> PathBuf {
        self.out.join("skipped.jsonl")
    }
    pub fn catalog(&self) -> PathBuf {
        self.out.join("catalog.jsonl")
    }
    pub fn diagnosis_dir(&self) -> PathBuf {
        self.out.join("diagnosis")
    }
    pub fn diagnosis_file(&self, transformation_id: &str) -> PathBuf {
        self.diagnosis_dir()
            .join(format!("{}.json", slug(transformation_id)))
    }
    pub fn diagnosis_index(&self) -> PathBuf {
        self.out.join("diagnosis.jsonl")
    }
    pub fn evidence_dir(&self, transformation_id: &str) -> PathBuf {
        self.out.join("evidence").join(slug(transformation_id))
    }
    pub fn samples(&self) -> PathBuf {
        self.out.join("samples.jsonl")
    }
    pub fn report(&self) -> PathBuf {
        self.out.join("report.md")
    }
    pub fn suggestions(&self) -> PathBuf {
        self.out.join("suggestions.jsonl")
    }
    pub fn summary(&self) -> PathBuf {
        self.out.join("summary.txt")
    }
    pub fn distances(&self) -> PathBuf {
        self.out.join("distances.tsv")
    }
}

/// Run work items on up to `workers` threads, preserving input order.
pub fn run_parallel<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    if workers <= 1 || n <= 1 {
        return items.into_iter().map(f).collect();
    }
    let queue: Mutex<VecDeque<(usize, T)>> = Mutex::new(items.into_iter().enumerate().collect());
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let item = queue.lock().expect("queue lock").pop_front();
                let Some((idx, item)) = item else { break };
                let result = f(item);
                results.lock().expect("results lock")[idx] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned lock")
        .into_iter()
        .map(|r| r.expect("worker filled slot"))
        .collect()
}

/// A test failing every verification run is consistently red; failing some
/// runs only makes it flaky (excluded from analysis but not fatal).
pub fn suite_status(failures: u32, verify_runs: u32) -> SuiteStatus {
    if failures == 0 {
        SuiteStatus::Pass
    } else if failures >= verify_runs {
        SuiteStatus::Fail
    } else {
        SuiteStatus::Flaky
    }
}

#[derive(Debug, Default)]
pub struct DiscoverOutcome {
    pub cache_hit: bool,
    /// Subject test processes spawned by this invocation.
    pub executed_runs: usize,
    pub methods: Vec<MethodDescriptor>,
    pub file_errors: Vec<crate::adapter::FileErrorRecord>,
    pub tests: Vec<TestCase>,
    pub flaky: Vec<TestId>,
    pub skipped: Vec<SkippedMethod>,
    pub catalog: Vec<ExtremeTransformation>,
    pub test_report: Vec<TestResult>,
}

/// Build (or reuse) the transformation catalog for a project.
pub fn discover(config: &CampaignConfig) -> Result<DiscoverOutcome> {
    config.validate()?;
    let paths = ArtifactPaths::new(&config.out_dir);
    let adapter = ProjectAdapter::new(&config.project_root, config.exec_config());
    let source_hash = hash_tree(&config.project_root, &[SRC_DIR, TESTS_DIR])?;
    let config_hash = config.catalog_config_hash();

    if let Ok(meta) = read_json::<CampaignMeta>(&paths.meta()) {
        if meta.schema_version == SCHEMA_VERSION
            && meta.source_hash == source_hash
            && meta.config_hash == config_hash
            && paths.catalog().is_file()
        {
            return load_discover_outcome(&paths);
        }
    }

    let discovery = adapter.discover_methods()?;
    let (mut tests, _) = adapter.discover_tests()?;
    let all_test_ids: BTreeSet<TestId> = tests.iter().map(|t| t.id.clone()).collect();

    // Verify the original suite verify_runs times; the last run also traces
    // coverage. A test failing every run is a red suite (abort); a test
    // failing intermittently is flaky and excluded from all analysis.
    let mut executed_runs = 0usize;
    let mut fail_counts: BTreeMap<TestId, u32> = BTreeMap::new();
    let mut first_report: Vec<TestResult> = Vec::new();
    let mut traces = Vec::new();
    if !all_test_ids.is_empty() {
        for run in 0..config.verify_runs {
            let traced = run + 1 == config.verify_runs;
            let artifacts = adapter.run_tests(
                &config.project_root,
                Some(&all_test_ids),
                &RunOptions {
                    traced,
                    observe_run_index: None,
                },
            )?;
            executed_runs += all_test_ids.len();
            if let Some(reason) = &artifacts.report.incomplete {
                return Err(Error::Subject(format!(
                    "original suite verification incomplete: {reason}"
                )));
            }
            for r in &artifacts.report.results {
                if !r.outcome.is_pass() {
                    *fail_counts.entry(r.test_id.clone()).or_insert(0) += 1;
                }
            }
            if run == 0 {
                first_report = artifacts.report.results.clone();
            }
            if traced {
                traces = artifacts.traces;
            }
        }
    }
    let mut red = Vec::new();
    for t in &mut tests {
        t.suite_status_on_original = suite_status(
            fail_counts.get(&t.id).copied().unwrap_or(0),
            config.verify_runs,
        );
        if t.suite_status_on_original == SuiteStatus::Fail {
            red.push(t.id.clone());
        }
    }
    if !red.is_empty() {
        return Err(Error::Subject(format!(
            "original test suite is red; failing test(s): {}. Fix or exclude them before analysis.",
            red.join(", ")
        )));
    }
    let flaky: Vec<TestId> = tests
        .iter()
        .filter(|t| t.suite_status_on_original == SuiteStatus::Flaky)
        .map(|t| t.id.clone())
        .collect();
    let passing: BTreeSet<TestId> = tests
        .iter()
        .filter(|t| t.suite_status_on_original == SuiteStatus::Pass)
        .map(|t| t.id.clone())
        .collect();

    traces.retain(|t| passing.contains(&t.test_id));
    let coverage = CoverageData::from_traces(traces);

    // Triviality filter, coverage filter, return-category resolution.
    let project = adapter.load_project()?;
    let (kept, mut skipped) = filter_trivial_methods(&project, &discovery.methods);
    let mut covered = Vec::new();
    for m in kept {
        if coverage.map.contains_key(&m.id) {
            covered.push(m);
        } else {
            skipped.push(SkippedMethod {
                method: m.id.clone(),
                reason: SkipReason::NotCovered,
            });
        }
    }
    let mut resolved = Vec::new();
    for mut m in covered {
        if m.return_category == ReturnCategory::Unknown {
            let categories: BTreeSet<ReturnCategory> = coverage
                .returned_kinds(&m.id)
                .iter()
                .filter_map(|k| ReturnCategory::from_runtime_kind(k))
                .collect();
            match categories.len() {
                0 => {
                    skipped.push(SkippedMethod {
                        method: m.id.clone(),
                        reason: SkipReason::UnsupportedReturnType,
                    });
                    continue;
                }
                1 => m.return_category = *categories.iter().next().expect("one element"),
                _ => {
                    skipped.push(SkippedMethod {
                        method: m.id.clone(),
                        reason: SkipReason::PolymorphicReturn,
                    });
                    continue;
                }
            }
        }
        resolved.push(m);
    }
    let (mut catalog, enum_skips) = enumerate_transformations(&resolved);
    skipped.extend(enum_skips);
    skipped.sort_by(|a, b| a.method.cmp(&b.method));

    // Detection, one private workspace per transformation.
    let resolved_by_id: BTreeMap<MethodId, MethodDescriptor> =
        resolved.iter().map(|m| (m.id.clone(), m.clone())).collect();
    let verdicts = run_parallel(catalog.clone(), config.workers.max(1), |t| {
        let descriptor = &resolved_by_id[&t.method];
        let covering = coverage.covering_tests(&t.method);
        let workspace = match tempfile::Builder::new()
            .prefix("stubscope-detect-")
            .tempdir()
        {
            Ok(d) => d,
            Err(_) => return (Detection::Unknown, 0usize, Vec::new()),
        };
        let run = || -> Result<crate::transform::DetectionVerdict> {
            copy_project(&config.project_root, workspace.path())?;
            apply_transformation(workspace.path(), &t, descriptor)?;
            detect(&adapter, workspace.path(), &covering)
        };
        match run() {
            Ok(v) => {
                let errors: Vec<TestId> = v
                    .results
                    .iter()
                    .filter(|r| {
                        matches!(
                            r.outcome,
                            crate::adapter::TestOutcomeKind::Error
                                | crate::adapter::TestOutcomeKind::Timeout
                        )
                    })
                    .map(|r| r.test_id.clone())
                    .collect();
                (v.detection, v.results.len(), errors)
            }
            Err(_) => (Detection::Unknown, 0, Vec::new()),
        }
    });
    for (t, (detection, runs, errors)) in catalog.iter_mut().zip(verdicts) {
        t.detection = detection;
        t.error_detections = errors;
        executed_runs += runs;
    }

    // Persist descriptors with resolved categories substituted in.
    let all_methods: Vec<MethodDescriptor> = discovery
        .methods
        .iter()
        .map(|m| {
            resolved_by_id
                .get(&m.id)
                .cloned()
                .unwrap_or_else(|| m.clone())
        })
        .collect();

    write_jsonl(&paths.methods(), &all_methods)?;
    write_jsonl(&paths.file_errors(), &discovery.errors)?;
    write_jsonl(&paths.tests(), &tests)?;
    write_jsonl(&paths.test_report(), &first_report)?;
    write_jsonl(&paths.coverage(), &coverage.traces)?;
    write_jsonl(&paths.skipped(), &skipped)?;
    write_jsonl(&paths.catalog(), &catalog)?;
    write_json(
        &paths.meta(),
        &CampaignMeta {
            schema_version: SCHEMA_VERSION,
            source_hash,
            config_hash,
        },
    )?;

    Ok(DiscoverOutcome {
        cache_hit: false,
        executed_runs,
        methods: all_methods,
        file_errors: discovery.errors,
        tests,
        flaky,
        skipped,
        catalog,
        test_report: first_report,
    })
}

fn load_discover_outcome(paths: &ArtifactPaths) -> Result<DiscoverOutcome> {
    let tests: Vec<TestCase> = read_jsonl(&paths.tests())?;
    Ok(DiscoverOutcome {
        cache_hit: true,
        executed_runs: 0,
        methods: read_jsonl(&paths.methods())?,
        file_errors: read_jsonl(&paths.file_errors())?,
        flaky: tests
            .iter()
            .filter(|t| t.suite_status_on_original == SuiteStatus::Flaky)
            .map(|t| t.id.clone())
            .collect(),
        tests,
        skipped: read_jsonl(&paths.skipped())?,
        catalog: read_jsonl(&paths.catalog())?,
        test_report: read_jsonl(&paths.test_report())?,
    })
}

#[derive(Debug, Default)]
pub struct DiagnoseOutcome {
    pub diagnoses: Vec<SymptomDiagnosis>,
    /// Transformations skipped because a diagnosis already existed.
    pub resumed: usize,
    pub samples: Vec<StackDistanceSample>,
}

struct MethodWork {
    fresh: Vec<ExtremeTransformation>,
    pending: Vec<(ExtremeTransformation, SymptomDiagnosis)>,
}

/// Diagnose every undetected transformation (or the `--only` subset),
/// resuming from existing per-transformation diagnosis files.
pub fn diagnose(config: &CampaignConfig) -> Result<DiagnoseOutcome> {
    config.validate()?;
    let paths = ArtifactPaths::new(&config.out_dir);
    let meta: CampaignMeta = read_json(&paths.meta()).map_err(|_| {
        Error::Prerequisite(format!(
            "no discovery artifacts under {}; run `stubscope discover` first",
            config.out_dir.display()
        ))
    })?;
    let source_hash = hash_tree(&config.project_root, &[SRC_DIR, TESTS_DIR])?;
    if meta.source_hash != source_hash {
        return Err(Error::Prerequisite(
            "sources changed since discovery; re-run `stubscope discover`".into(),
        ));
    }

    let catalog: Vec<ExtremeTransformation> = read_jsonl(&paths.catalog())?;
    let methods: Vec<MethodDescriptor> = read_jsonl(&paths.methods())?;
    let tests: Vec<TestCase> = read_jsonl(&paths.tests())?;
    let coverage = CoverageData::from_traces(read_jsonl(&paths.coverage())?);
    let descriptors: BTreeMap<MethodId, MethodDescriptor> =
        methods.into_iter().map(|m| (m.id.clone(), m)).collect();
    let test_map: BTreeMap<TestId, TestCase> =
        tests.into_iter().map(|t| (t.id.clone(), t)).collect();

    let undetected: Vec<ExtremeTransformation> = catalog
        .iter()
        .filter(|t| t.detection == Detection::Undetected)
        .cloned()
        .collect();
    let selected: Vec<ExtremeTransformation> = match &config.only {
        Some(ids) => {
            let known: BTreeSet<&str> = undetected.iter().map(|t| t.id.as_str()).collect();
            for id in ids {
                if !known.contains(id.as_str()) {
                    return Err(Error::Config(format!(
                        "--only: `{id}` is not an undetected transformation of this campaign"
                    )));
                }
            }
            undetected
                .iter()
                .filter(|t| ids.contains(&t.id))
                .cloned()
                .collect()
        }
        None => undetected.clone(),
    };

    // Partition into already-diagnosed, pending-propagation and fresh.
    let mut resumed = 0usize;
    let mut finished: Vec<SymptomDiagnosis> = Vec::new();
    let mut work: BTreeMap<MethodId, MethodWork> = BTreeMap::new();
    for t in &selected {
        let dpath = paths.diagnosis_file(&t.id);
        if dpath.is_file() {
            let existing: SymptomDiagnosis = read_json(&dpath)?;
            let needs_propagation = existing.symptom == SymptomClass::InfectionPending
                && config.stage != StageSelection::Infection;
            if needs_propagation {
                work.entry(t.method.clone())
                    .or_insert_with(|| MethodWork {
                        fresh: Vec::new(),
                        pending: Vec::new(),
                    })
                    .pending
                    .push((t.clone(), existing));
            } else {
                finished.push(existing);
                resumed += 1;
            }
        } else {
            if config.stage == StageSelection::Propagation {
                return Err(Error::Prerequisite(format!(
                    "no infection-stage verdict for `{}`; run `stubscope diagnose --stage infection` first",
                    t.id
                )));
            }
            work.entry(t.method.clone())
                .or_insert_with(|| MethodWork {
                    fresh: Vec::new(),
                    pending: Vec::new(),
                })
                .fresh
                .push(t.clone());
        }
    }

    let adapter = ProjectAdapter::new(&config.project_root, config.exec_config());
    let ctx = AnalysisContext {
        adapter: &adapter,
        runs: config.runs,
        stage: config.stage,
        descriptors: &descriptors,
        coverage: &coverage,
        tests: &test_map,
    };

    let groups: Vec<MethodWork> = work.into_values().collect();
    let produced: Vec<Vec<SymptomDiagnosis>> =
        run_parallel(groups, config.workers.max(1), |group| {
            let mut analyzer = MethodAnalyzer::new(&ctx);
            let mut out = Vec::new();
            for t in group.fresh {
                let diagnosis = analyze_and_persist(&paths, &mut analyzer, &t, None);
                out.push(diagnosis);
            }
            for (t, pending) in group.pending {
                let diagnosis = analyze_and_persist(&paths, &mut analyzer, &t, Some(pending));
                out.push(diagnosis);
            }
            out
        });
    finished.extend(produced.into_iter().flatten());
    finished.sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));

    // Stack distances come from the coverage trace; no extra subject runs.
    let mut samples = Vec::new();
    for t in &undetected {
        let covering = coverage.covering_tests(&t.method);
        if let Ok(sample) = measure_stack_distance(&coverage, &t.id, &t.method, &covering) {
            samples.push(sample);
        }
    }
    write_jsonl(&paths.samples(), &samples)?;

    // Rebuild the diagnosis index from every persisted diagnosis.
    let mut rows = Vec::new();
    for t in &undetected {
        let dpath = paths.diagnosis_file(&t.id);
        if dpath.is_file() {
            let d: SymptomDiagnosis = read_json(&dpath)?;
            rows.push(DiagnosisRow {
                transformation_id: d.transformation_id.clone(),
                symptom: d.symptom.label().to_string(),
                evidence_path: format!("evidence/{}", slug(&d.transformation_id)),
            });
        }
    }
    rows.sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));
    write_jsonl(&paths.diagnosis_index(), &rows)?;

    Ok(DiagnoseOutcome {
        diagnoses: finished,
        resumed,
        samples,
    })
}

/// Run one transformation's analysis, persist its evidence and diagnosis,
/// and contain every error as an inconclusive verdict.
fn analyze_and_persist(
    paths: &ArtifactPaths,
    analyzer: &mut MethodAnalyzer<'_>,
    t: &ExtremeTransformation,
    pending: Option<SymptomDiagnosis>,
) -> SymptomDiagnosis {
    let result: Result<AnalysisOutput> = match pending {
        None => analyzer.analyze(t),
        Some(diagnosis) => analyzer.resume_propagation(t, diagnosis),
    };
    let output = match result {
        Ok(output) => output,
        Err(e) => {
            let diagnosis = SymptomDiagnosis {
                transformation_id: t.id.clone(),
                method: t.method.clone(),
                stub_value: t.stub_value.clone(),
                symptom: SymptomClass::Inconclusive,
                inconclusive_reason: Some(format!("analysis error: {e}")),
                covering_tests: BTreeSet::new(),
                method_diff: Default::default(),
                test_diff: Default::default(),
                excluded_tests: Vec::new(),
                notes: Vec::new(),
            };
            let _ = write_json(&paths.diagnosis_file(&t.id), &diagnosis);
            return diagnosis;
        }
    };
    if let Err(e) = persist_output(paths, &output) {
        let mut diagnosis = output.diagnosis;
        diagnosis.symptom = SymptomClass::Inconclusive;
        diagnosis.inconclusive_reason = Some(format!("evidence persistence failed: {e}"));
        let _ = write_json(
            &paths.diagnosis_file(&diagnosis.transformation_id),
            &diagnosis,
        );
        return diagnosis;
    }
    output.diagnosis
}

fn persist_output(paths: &ArtifactPaths, output: &AnalysisOutput) -> Result<()> {
    let d = &output.diagnosis;
    let dir = paths.evidence_dir(&d.transformation_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let state_records = |state: &Option<crate::observe::InvariantState>| -> Vec<InvariantRecord> {
        state.as_ref().map(|s| s.to_records()).unwrap_or_default()
    };
    write_jsonl(
        &dir.join("method-state-original.jsonl"),
        &state_records(&output.method_state_original),
    )?;
    write_jsonl(
        &dir.join("method-state-transformed.jsonl"),
        &state_records(&output.method_state_transformed),
    )?;
    write_jsonl(&dir.join("method-diff.jsonl"), &d.method_diff.entries)?;
    write_jsonl(
        &dir.join("test-state-original.jsonl"),
        &state_records(&output.test_state_original),
    )?;
    write_jsonl(
        &dir.join("test-state-transformed.jsonl"),
        &state_records(&output.test_state_transformed),
    )?;
    write_jsonl(&dir.join("test-diff.jsonl"), &d.test_diff.entries)?;
    write_jsonl(&dir.join("sites.jsonl"), &output.sites)?;
    write_json(&paths.diagnosis_file(&d.transformation_id), d)
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub report_path: PathBuf,
    pub suggestions_path: PathBuf,
    pub summary_path: PathBuf,
    pub distances_path: PathBuf,
    pub suggestions: Vec<Suggestion>,
    pub unresolved: Vec<UnresolvedEntry>,
    pub summary: CampaignSummary,
}

/// Render suggestions and analytics from persisted evidence only; no test
/// execution happens here.
pub fn report(config: &CampaignConfig) -> Result<ReportOutcome> {
    let paths = ArtifactPaths::new(&config.out_dir);
    let rows: Vec<DiagnosisRow> = read_jsonl(&paths.diagnosis_index()).map_err(|_| {
        Error::Prerequisite(format!(
            "no diagnosis artifacts under {}; run `stubscope diagnose` first",
            config.out_dir.display()
        ))
    })?;
    let catalog: Vec<ExtremeTransformation> = read_jsonl(&paths.catalog())?;
    let methods: Vec<MethodDescriptor> = read_jsonl(&paths.methods())?;
    let samples: Vec<StackDistanceSample> = if paths.samples().is_file() {
        read_jsonl(&paths.samples())?
    } else {
        Vec::new()
    };
    let descriptors: BTreeMap<MethodId, MethodDescriptor> =
        methods.into_iter().map(|m| (m.id.clone(), m)).collect();

    let mut diagnoses = Vec::new();
    for row in &rows {
        diagnoses.push(read_json::<SymptomDiagnosis>(
            &paths.diagnosis_file(&row.transformation_id),
        )?);
    }
    diagnoses.sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));

    let adapter = ProjectAdapter::new(&config.project_root, config.exec_config());
    let project = adapter.load_project()?;
    let graph = build_call_graph(&project);
    let filter = PathFilter::new(&config.include, &config.exclude);
    let _ = filter; // discovery-time filters already shaped the catalog

    let sample_by_id: BTreeMap<&str, &StackDistanceSample> = samples
        .iter()
        .map(|s| (s.transformation_id.as_str(), s))
        .collect();

    let observers_for = |field: &str| -> Vec<MethodId> {
        let mut out = Vec::new();
        for (name, class) in &project.classes {
            if class.in_test_file || !class.info.fields.iter().any(|f| f == field) {
                continue;
            }
            for m in field_observers(&project, &graph, &descriptors, name, field) {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        out
    };

    let mut suggestions = Vec::new();
    let mut unresolved = Vec::new();
    for d in &diagnoses {
        match d.symptom {
            SymptomClass::NoInfection => suggestions.push(suggest_no_infection(d)),
            SymptomClass::NoPropagation => {
                let entries = accessible_entry_points(&graph, &descriptors, &d.method);
                let sample = sample_by_id.get(d.transformation_id.as_str()).copied();
                suggestions.push(suggest_no_propagation(d, &entries, sample));
            }
            SymptomClass::WeakOracle => {
                let sites_path = paths.evidence_dir(&d.transformation_id).join("sites.jsonl");
                let sites: Vec<SiteInfo> = if sites_path.is_file() {
                    read_jsonl(&sites_path)?
                } else {
                    Vec::new()
                };
                suggestions.push(suggest_weak_oracle(d, &sites, &observers_for));
            }
            SymptomClass::Inconclusive | SymptomClass::InfectionPending => {
                unresolved.push(UnresolvedEntry {
                    transformation_id: d.transformation_id.clone(),
                    symptom: d.symptom.label().to_string(),
                    reason: d
                        .inconclusive_reason
                        .clone()
                        .unwrap_or_else(|| "propagation stage not run".into()),
                });
            }
        }
    }
    suggestions.sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));
    unresolved.sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));

    let summary = analytics::summarize(&catalog, &diagnoses, &samples);
    let label = config
        .project_root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| config.project_root.display().to_string());

    let human = render_report(&label, &summary, &suggestions, &unresolved);
    atomic_write(&paths.report(), human.as_bytes())?;
    atomic_write(
        &paths.out.join("graph.txt"),
        graph.to_edge_list().as_bytes(),
    )?;
    write_jsonl(&paths.suggestions(), &suggestions)?;
    atomic_write(
        &paths.summary(),
        analytics::render_summary(&summary).as_bytes(),
    )?;
    atomic_write(
        &paths.distances(),
        analytics::render_distance_table(&summary).as_bytes(),
    )?;

    Ok(ReportOutcome {
        report_path: paths.report(),
        suggestions_path: paths.suggestions(),
        summary_path: paths.summary(),
        distances_path: paths.distances(),
        suggestions,
        unresolved,
        summary,
    })
}
