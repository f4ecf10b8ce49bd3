//! End-to-end pipeline tests over the bundled fixture projects, driving
//! subject tests through the real child-process runner.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use stubscope_core::adapter::{CoverageData, ProjectAdapter, RunOptions};
use stubscope_core::campaign::ArtifactPaths;
use stubscope_core::config::StageSelection;
use stubscope_core::persist::read_jsonl;
use stubscope_core::rip::SymptomClass;
use stubscope_core::transform::{apply_transformation, detect, Detection, SkipReason};
use stubscope_core::{diagnose, discover, report, Error};

fn set_id(name: &str, arity: usize) -> String {
    format!("src/versioned_set.mini::VersionedSet::{name}/{arity}")
}

fn adapter_for(config: &stubscope_core::CampaignConfig) -> ProjectAdapter {
    ProjectAdapter::new(&config.project_root, config.exec_config())
}

#[test]
fn versioned_set_discovery_matches_ground_truth() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let outcome = discover(&config).unwrap();

    assert!(!outcome.cache_hit);
    assert_eq!(outcome.methods.len(), 9, "nine descriptors expected");
    assert_eq!(outcome.tests.len(), 3);
    assert!(outcome.flaky.is_empty());
    assert!(outcome.file_errors.is_empty());

    let reasons: BTreeMap<&str, SkipReason> = outcome
        .skipped
        .iter()
        .map(|s| (s.method.as_str(), s.reason))
        .collect();
    assert_eq!(
        reasons.get(set_id("getVersion", 0).as_str()),
        Some(&SkipReason::SimpleGetter)
    );
    assert_eq!(
        reasons.get(set_id("size", 0).as_str()),
        Some(&SkipReason::Delegation)
    );
    assert_eq!(
        reasons.get(set_id("contains", 1).as_str()),
        Some(&SkipReason::Delegation)
    );
    assert_eq!(
        reasons.get(set_id("constructor", 0).as_str()),
        Some(&SkipReason::Constructor)
    );

    assert_eq!(outcome.catalog.len(), 7, "seven transformations expected");
    let detection: BTreeMap<&str, Detection> = outcome
        .catalog
        .iter()
        .map(|t| (t.id.as_str(), t.detection))
        .collect();
    let detected = |name: &str, arity: usize, variant: usize| {
        detection[format!("{}#{variant}", set_id(name, arity)).as_str()]
    };
    assert_eq!(detected("add", 1, 0), Detection::Detected);
    assert_eq!(
        detected("equals", 1, 1),
        Detection::Detected,
        "equals -> false"
    );
    assert_eq!(
        detected("intersect", 1, 0),
        Detection::Detected,
        "intersect -> null"
    );
    assert_eq!(detected("incrementVersion", 0, 0), Detection::Undetected);
    assert_eq!(
        detected("equals", 1, 0),
        Detection::Undetected,
        "equals -> true"
    );
    assert_eq!(
        detected("isEmpty", 0, 0),
        Detection::Undetected,
        "isEmpty -> true"
    );
    assert_eq!(
        detected("isEmpty", 0, 1),
        Detection::Undetected,
        "isEmpty -> false"
    );
}

#[test]
fn coverage_map_traces_the_fixture() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    let paths = ArtifactPaths::new(&config.out_dir);
    let coverage = CoverageData::from_traces(read_jsonl(&paths.coverage()).unwrap());

    let tests_of = |name: &str, arity: usize| -> BTreeSet<String> {
        coverage.covering_tests(&set_id(name, arity))
    };
    assert_eq!(
        tests_of("equals", 1),
        BTreeSet::from(["tests/versioned_set_test.mini::testEquals".to_string()])
    );
    assert_eq!(
        tests_of("isEmpty", 0),
        BTreeSet::from(["tests/versioned_set_test.mini::testIntersection".to_string()])
    );
    assert_eq!(
        tests_of("incrementVersion", 0),
        BTreeSet::from([
            "tests/versioned_set_test.mini::testAdd".to_string(),
            "tests/versioned_set_test.mini::testIntersection".to_string(),
        ])
    );
    // getVersion is never executed: absent from the map entirely.
    assert!(coverage.covering_tests(&set_id("getVersion", 0)).is_empty());

    // Re-running exactly the covering tests executes the method again.
    let adapter = adapter_for(&config);
    let artifacts = adapter
        .run_tests(
            &config.project_root,
            Some(&tests_of("isEmpty", 0)),
            &RunOptions {
                traced: true,
                observe_run_index: None,
            },
        )
        .unwrap();
    assert!(artifacts
        .traces
        .iter()
        .any(|t| t.method_id == set_id("isEmpty", 0)));
}

#[test]
fn discovery_is_idempotent_and_cached() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let first = discover(&config).unwrap();
    let second = discover(&config).unwrap();
    assert!(second.cache_hit);
    assert_eq!(
        second.executed_runs, 0,
        "cache hit must execute zero subject tests"
    );
    assert_eq!(first.catalog, second.catalog);
    let first_ids: Vec<&String> = first.methods.iter().map(|m| &m.id).collect();
    let second_ids: Vec<&String> = second.methods.iter().map(|m| &m.id).collect();
    assert_eq!(first_ids, second_ids);
}

#[test]
fn source_change_invalidates_the_cache() {
    let scratch = tempfile::tempdir().unwrap();
    let project = common::copy_fixture("versioned-set", scratch.path());
    let out = scratch.path().join("out");
    let config = common::config(&project, &out);
    discover(&config).unwrap();
    // Touch a source file with a semantic change.
    let file = project.join("src/versioned_set.mini");
    let text = std::fs::read_to_string(&file)
        .unwrap()
        .replace("version + 1", "version + 1 + 0");
    std::fs::write(&file, text).unwrap();
    let again = discover(&config).unwrap();
    assert!(!again.cache_hit);
}

#[test]
fn unknown_test_filter_is_an_error() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let adapter = adapter_for(&config);
    let bogus = BTreeSet::from(["tests/versioned_set_test.mini::nope".to_string()]);
    let err = adapter
        .run_tests(&config.project_root, Some(&bogus), &RunOptions::default())
        .unwrap_err();
    assert!(matches!(err, Error::UnknownTest(id) if id.contains("nope")));
}

#[test]
fn filtered_run_executes_exactly_one_test() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let adapter = adapter_for(&config);
    let one = BTreeSet::from(["tests/versioned_set_test.mini::testAdd".to_string()]);
    let artifacts = adapter
        .run_tests(&config.project_root, Some(&one), &RunOptions::default())
        .unwrap();
    assert_eq!(artifacts.report.results.len(), 1);
    assert!(artifacts.report.all_pass());
}

#[test]
fn red_suite_aborts_discovery() {
    let scratch = tempfile::tempdir().unwrap();
    common::write_project(
        scratch.path(),
        &[
            ("src/m.mini", "fn one(): int { return 1; }"),
            (
                "tests/m_test.mini",
                "test broken() { assertEquals(2, one()); }",
            ),
        ],
    );
    let out = scratch.path().join("out");
    let config = common::config(scratch.path(), &out);
    let err = discover(&config).unwrap_err();
    assert!(
        matches!(&err, Error::Subject(m) if m.contains("red")),
        "got {err}"
    );
}

#[test]
fn parse_errors_are_recorded_and_do_not_block() {
    let scratch = tempfile::tempdir().unwrap();
    common::write_project(
        scratch.path(),
        &[
            ("src/good.mini", "fn ok(): int { return 1; }"),
            ("src/bad.mini", "fn broken( {"),
            ("tests/t.mini", "test usesGood() { assertEquals(1, ok()); }"),
        ],
    );
    let out = scratch.path().join("out");
    let config = common::config(scratch.path(), &out);
    let outcome = discover(&config).unwrap();
    assert_eq!(outcome.file_errors.len(), 1);
    assert_eq!(outcome.file_errors[0].file, "src/bad.mini");
    assert!(outcome
        .methods
        .iter()
        .any(|m| m.id.contains("good.mini::ok")));
}

#[test]
fn empty_project_discovers_nothing() {
    let scratch = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(scratch.path().join("src")).unwrap();
    std::fs::create_dir_all(scratch.path().join("tests")).unwrap();
    let out = scratch.path().join("out");
    let config = common::config(scratch.path(), &out);
    let outcome = discover(&config).unwrap();
    assert!(outcome.methods.is_empty());
    assert!(outcome.catalog.is_empty());
}

#[test]
fn detection_is_monotone_under_test_supersets() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let outcome = discover(&config).unwrap();
    // equals -> false is detected with its covering subset {testEquals}.
    let equals_false = outcome
        .catalog
        .iter()
        .find(|t| t.id == format!("{}#1", set_id("equals", 1)))
        .unwrap();
    assert_eq!(equals_false.detection, Detection::Detected);

    // Re-run against the full suite: still detected.
    let descriptor = outcome
        .methods
        .iter()
        .find(|m| m.id == set_id("equals", 1))
        .unwrap();
    let scratch = tempfile::tempdir().unwrap();
    stubscope_core::persist::copy_project(&config.project_root, scratch.path()).unwrap();
    apply_transformation(scratch.path(), equals_false, descriptor).unwrap();
    let adapter = adapter_for(&config);
    let all_tests: BTreeSet<String> = outcome.tests.iter().map(|t| t.id.clone()).collect();
    let verdict = detect(&adapter, scratch.path(), &all_tests).unwrap();
    assert_eq!(verdict.detection, Detection::Detected);
}

fn fixture_symptoms(project: &Path, runs: u32) -> BTreeMap<String, SymptomClass> {
    let out = tempfile::tempdir().unwrap();
    let mut config = common::config(project, out.path());
    config.runs = runs;
    discover(&config).unwrap();
    let outcome = diagnose(&config).unwrap();
    outcome
        .diagnoses
        .iter()
        .map(|d| (d.transformation_id.clone(), d.symptom))
        .collect()
}

#[test]
fn versioned_set_symptoms_match_ground_truth() {
    let symptoms = fixture_symptoms(&common::fixture("versioned-set"), 3);
    assert_eq!(symptoms.len(), 4);
    assert_eq!(
        symptoms[&format!("{}#0", set_id("equals", 1))],
        SymptomClass::NoInfection
    );
    assert_eq!(
        symptoms[&format!("{}#1", set_id("isEmpty", 0))],
        SymptomClass::NoInfection
    );
    assert_eq!(
        symptoms[&format!("{}#0", set_id("isEmpty", 0))],
        SymptomClass::NoPropagation
    );
    assert_eq!(
        symptoms[&format!("{}#0", set_id("incrementVersion", 0))],
        SymptomClass::WeakOracle
    );
}

#[test]
fn increment_version_diagnosis_carries_the_version_evidence() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    let outcome = diagnose(&config).unwrap();
    let diagnosis = outcome
        .diagnoses
        .iter()
        .find(|d| d.transformation_id == format!("{}#0", set_id("incrementVersion", 0)))
        .unwrap();

    // Stage 1: the receiver's version field differs, 1 vs 0.
    assert!(diagnosis
        .method_diff
        .entries
        .iter()
        .any(|e| e.key.path == "this.version" && e.original == "1" && e.transformed == "0"));
    // Stage 2: the difference reaches test expressions on the same field.
    assert!(!diagnosis.test_diff.is_empty());
    assert!(diagnosis
        .test_diff
        .entries
        .iter()
        .all(|e| e.key.path.ends_with("version")));
    assert!(diagnosis.validate().is_ok());
}

#[test]
fn diagnose_resumes_to_an_identical_catalog() {
    let fixture = common::fixture("versioned-set");
    let interrupted_out = tempfile::tempdir().unwrap();
    let fresh_out = tempfile::tempdir().unwrap();

    // Interrupted: first classify only one transformation, then finish.
    let mut config = common::config(&fixture, interrupted_out.path());
    discover(&config).unwrap();
    config.only = Some(vec![format!("{}#0", set_id("incrementVersion", 0))]);
    diagnose(&config).unwrap();
    config.only = None;
    let resumed = diagnose(&config).unwrap();
    assert_eq!(resumed.resumed, 1, "one diagnosis should be reused");

    // Fresh: one uninterrupted run.
    let fresh_config = common::config(&fixture, fresh_out.path());
    discover(&fresh_config).unwrap();
    diagnose(&fresh_config).unwrap();

    let read =
        |out: &Path| std::fs::read_to_string(ArtifactPaths::new(out).diagnosis_index()).unwrap();
    assert_eq!(read(interrupted_out.path()), read(fresh_out.path()));
}

#[test]
fn stage_selection_splits_the_analysis() {
    let out = tempfile::tempdir().unwrap();
    let mut config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();

    config.stage = StageSelection::Infection;
    let stage1 = diagnose(&config).unwrap();
    let by_id: BTreeMap<&str, SymptomClass> = stage1
        .diagnoses
        .iter()
        .map(|d| (d.transformation_id.as_str(), d.symptom))
        .collect();
    assert_eq!(
        by_id[format!("{}#0", set_id("equals", 1)).as_str()],
        SymptomClass::NoInfection
    );
    assert_eq!(
        by_id[format!("{}#0", set_id("isEmpty", 0)).as_str()],
        SymptomClass::InfectionPending
    );
    // No test instrumentation ran: no sites evidence for the pending one.
    let paths = ArtifactPaths::new(&config.out_dir);
    let pending_sites = paths
        .evidence_dir(&format!("{}#0", set_id("isEmpty", 0)))
        .join("sites.jsonl");
    let empty = !pending_sites.is_file()
        || std::fs::read_to_string(&pending_sites)
            .unwrap()
            .trim()
            .is_empty();
    assert!(empty, "infection stage must not instrument tests");

    config.stage = StageSelection::Propagation;
    let stage2 = diagnose(&config).unwrap();
    let by_id: BTreeMap<&str, SymptomClass> = stage2
        .diagnoses
        .iter()
        .map(|d| (d.transformation_id.as_str(), d.symptom))
        .collect();
    assert_eq!(
        by_id[format!("{}#0", set_id("isEmpty", 0)).as_str()],
        SymptomClass::NoPropagation
    );
    assert_eq!(
        by_id[format!("{}#0", set_id("incrementVersion", 0)).as_str()],
        SymptomClass::WeakOracle
    );
}

#[test]
fn report_requires_diagnosis_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let err = report(&config).unwrap_err();
    assert!(
        matches!(&err, Error::Prerequisite(m) if m.contains("diagnose")),
        "got {err}"
    );
}

#[test]
fn diagnose_requires_discovery_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    let err = diagnose(&config).unwrap_err();
    assert!(
        matches!(&err, Error::Prerequisite(m) if m.contains("discover")),
        "got {err}"
    );
}

#[test]
fn report_states_suggestions_for_each_symptom() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    diagnose(&config).unwrap();
    let outcome = report(&config).unwrap();

    assert_eq!(outcome.suggestions.len(), 4);
    assert!(outcome.unresolved.is_empty());
    let by_symptom = |s: &str| {
        outcome
            .suggestions
            .iter()
            .filter(|x| x.symptom == s)
            .count()
    };
    assert_eq!(by_symptom("no-infection"), 2);
    assert_eq!(by_symptom("no-propagation"), 1);
    assert_eq!(by_symptom("weak-oracle"), 1);

    // The no-propagation suggestion targets isEmpty itself (it is public).
    let np = outcome
        .suggestions
        .iter()
        .find(|s| s.symptom == "no-propagation")
        .unwrap();
    assert_eq!(np.target_methods.first(), Some(&set_id("isEmpty", 0)));

    // The weak-oracle suggestion names getVersion with expected value 1.
    let wo = outcome
        .suggestions
        .iter()
        .find(|s| s.symptom == "weak-oracle")
        .unwrap();
    assert_eq!(wo.target_methods, vec![set_id("getVersion", 0)]);
    let site = wo.assertion_site.as_ref().unwrap();
    assert!(site.property_path.ends_with("version"));
    assert_eq!(site.expected_value, "1");

    // Round-trip: catalog parses back to the same suggestions.
    let text = std::fs::read_to_string(&outcome.suggestions_path).unwrap();
    let parsed = stubscope_core::suggest::parse_catalog(&text).unwrap();
    assert_eq!(parsed, outcome.suggestions);

    // Infection loci: incrementVersion corrupts the receiver, the isEmpty
    // infection shows in the result value.
    assert_eq!(outcome.summary.locus_receiver, 1);
    assert_eq!(outcome.summary.locus_result, 1);
    assert_eq!(outcome.summary.locus_arguments, 0);
    assert_eq!(outcome.summary.infected, 2);
}

#[test]
fn fully_detected_project_reports_the_empty_banner() {
    let scratch = tempfile::tempdir().unwrap();
    common::write_project(
        scratch.path(),
        &[
            ("src/m.mini", "fn triple(x): int { return x * 3; }"),
            (
                "tests/m_test.mini",
                "test exact() { assertEquals(6, triple(2)); }",
            ),
        ],
    );
    let out = scratch.path().join("out");
    let config = common::config(scratch.path(), &out);
    let discovered = discover(&config).unwrap();
    assert!(discovered
        .catalog
        .iter()
        .all(|t| t.detection == Detection::Detected));
    diagnose(&config).unwrap();
    let outcome = report(&config).unwrap();
    assert!(outcome.suggestions.is_empty());
    let text = std::fs::read_to_string(&outcome.report_path).unwrap();
    assert!(
        text.contains("No undetected transformations"),
        "report:\n{text}"
    );
}

#[test]
fn ledger_fixture_diagnoses_cleanly() {
    let symptoms = fixture_symptoms(&common::fixture("ledger"), 2);
    // checkAmount removal is undetected (the precondition is never violated
    // in the tests) and produces no state difference: a no-infection case.
    let check_amount = "src/account.mini::Account::checkAmount/1#0".to_string();
    assert_eq!(
        symptoms.get(&check_amount),
        Some(&SymptomClass::NoInfection)
    );
    // operationCount -> 1 matches the only observed value: no infection.
    let op_count_one = "src/account.mini::Account::operationCount/0#1".to_string();
    assert_eq!(
        symptoms.get(&op_count_one),
        Some(&SymptomClass::NoInfection)
    );
}

#[test]
fn wordbag_surface_covers_more_stub_kinds() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("wordbag"), out.path());
    let outcome = discover(&config).unwrap();
    let stub_of = |tid: &str| {
        outcome
            .catalog
            .iter()
            .find(|t| t.id.ends_with(tid))
            .map(|t| t.stub_value.clone())
    };
    assert_eq!(stub_of("fillRatio/1#1").as_deref(), Some("0.1"));
    assert_eq!(stub_of("initial/1#1").as_deref(), Some("'A'"));
    assert_eq!(stub_of("toList/0#0").as_deref(), Some("[]"));
    // describe() has no annotation; its category is inferred from the run.
    assert_eq!(stub_of("describe/0#1").as_deref(), Some("\"A\""));

    let symptoms = fixture_symptoms(&common::fixture("wordbag"), 2);
    assert_eq!(
        symptoms.get("src/word_bag.mini::WordBag::fillRatio/1#1"),
        Some(&SymptomClass::WeakOracle),
        "fillRatio -> 0.1 propagates to the asserted comparison input"
    );
    assert_eq!(
        symptoms.get("src/word_bag.mini::WordBag::describe/0#1"),
        Some(&SymptomClass::WeakOracle)
    );
}

#[test]
fn weak_oracle_on_direct_value_asserts_the_expression_itself() {
    let out = tempfile::tempdir().unwrap();
    let mut config = common::config(&common::fixture("wordbag"), out.path());
    config.runs = 2;
    discover(&config).unwrap();
    diagnose(&config).unwrap();
    let outcome = report(&config).unwrap();
    let fill = outcome
        .suggestions
        .iter()
        .find(|s| s.transformation_id.contains("fillRatio/1#1"))
        .expect("fillRatio suggestion");
    assert_eq!(fill.symptom, "weak-oracle");
    let site = fill.assertion_site.as_ref().unwrap();
    assert_eq!(site.property_path, "value");
    assert_eq!(site.expected_value, "0.25");
    assert!(
        fill.target_methods.is_empty(),
        "direct value needs no observer indirection"
    );
}

#[test]
fn campaign_never_mutates_the_subject_project() {
    let scratch = tempfile::tempdir().unwrap();
    let project = common::copy_fixture("versioned-set", scratch.path());
    let before = stubscope_core::persist::hash_tree(&project, &["src", "tests"]).unwrap();
    let out = scratch.path().join("out");
    let config = common::config(&project, &out);
    discover(&config).unwrap();
    diagnose(&config).unwrap();
    report(&config).unwrap();
    let after = stubscope_core::persist::hash_tree(&project, &["src", "tests"]).unwrap();
    assert_eq!(
        before, after,
        "analysis must leave the pristine project byte-identical"
    );
}

#[test]
fn method_observation_records_every_root() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    diagnose(&config).unwrap();
    // equals is non-void, non-static, one-arg: each invocation record must
    // carry this, arg0 and result roots.
    let paths = ArtifactPaths::new(&config.out_dir);
    let evidence = paths
        .evidence_dir(&format!("{}#0", set_id("equals", 1)))
        .join("method-state-original.jsonl");
    let records: Vec<stubscope_core::observe::InvariantRecord> = read_jsonl(&evidence).unwrap();
    assert!(!records.is_empty());
    let roots: BTreeSet<&str> = records
        .iter()
        .map(|r| r.path.split('.').next().unwrap())
        .collect();
    assert!(roots.contains("this"), "roots: {roots:?}");
    assert!(roots.contains("arg0"), "roots: {roots:?}");
    assert!(roots.contains("result"), "roots: {roots:?}");
}

#[test]
fn assertion_expected_values_match_the_original_invariant_state() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    diagnose(&config).unwrap();
    let outcome = report(&config).unwrap();
    let paths = ArtifactPaths::new(&config.out_dir);
    let mut checked = 0;
    for suggestion in outcome
        .suggestions
        .iter()
        .filter(|s| s.assertion_site.is_some())
    {
        let site = suggestion.assertion_site.as_ref().unwrap();
        let evidence_dir = paths.evidence_dir(&suggestion.transformation_id);
        // Resolve the assertion location back to its site id.
        let sites: Vec<stubscope_core::instrument::SiteInfo> =
            read_jsonl(&evidence_dir.join("sites.jsonl")).unwrap();
        let info = sites
            .iter()
            .find(|i| i.file == site.file && i.line == site.line && i.col == site.col)
            .expect("assertion site must exist in the site table");
        let records: Vec<stubscope_core::observe::InvariantRecord> =
            read_jsonl(&evidence_dir.join("test-state-original.jsonl")).unwrap();
        assert!(
            records.iter().any(|r| r.point == info.site_id
                && r.path == site.property_path
                && r.value == site.expected_value),
            "expected value {} for {} at {} must be a cross-run-constant original value",
            site.expected_value,
            site.property_path,
            info.site_id
        );
        checked += 1;
    }
    assert!(
        checked > 0,
        "fixture campaign must produce at least one assertion site"
    );
}

#[test]
fn static_reach_covers_dynamic_reach() {
    let out = tempfile::tempdir().unwrap();
    let config = common::config(&common::fixture("versioned-set"), out.path());
    discover(&config).unwrap();
    let paths = ArtifactPaths::new(&config.out_dir);
    let coverage = CoverageData::from_traces(read_jsonl(&paths.coverage()).unwrap());
    let adapter = adapter_for(&config);
    let project = adapter.load_project().unwrap();
    let graph = stubscope_core::insight::build_call_graph(&project);
    for trace in &coverage.traces {
        for pair in trace.chain.windows(2) {
            assert!(
                graph.has_edge(&pair[0], &pair[1]),
                "dynamic edge {} -> {} missing statically",
                pair[0],
                pair[1]
            );
        }
    }
}

#[test]
fn timeout_under_transformation_counts_as_detection() {
    // Stubbing `done` to false makes the test loop forever; the timeout is
    // observable behavior and therefore a detection, reported as such.
    let scratch = tempfile::tempdir().unwrap();
    common::write_project(
        scratch.path(),
        &[
            (
                "src/box.mini",
                "class Box {\n    var n;\n    constructor() { this.n = 0; }\n    fn step(): void { this.n = this.n + 1; }\n    fn done(): bool { return this.n >= 3; }\n}\n",
            ),
            (
                "tests/box_test.mini",
                "test runsToCompletion() {\n    var b = new Box();\n    while (!b.done()) { b.step(); }\n    assertTrue(b.done());\n}\n",
            ),
        ],
    );
    let out = scratch.path().join("out");
    let mut config = common::config(scratch.path(), &out);
    config.timeout_secs = 2;
    let outcome = discover(&config).unwrap();
    let done_false = outcome
        .catalog
        .iter()
        .find(|t| t.id == "src/box.mini::Box::done/0#1")
        .expect("done -> false variant");
    assert_eq!(done_false.detection, Detection::Detected);
    assert!(
        !done_false.error_detections.is_empty(),
        "timeout detections are flagged for review"
    );
}

#[test]
fn polymorphic_return_is_skipped() {
    let scratch = tempfile::tempdir().unwrap();
    common::write_project(
        scratch.path(),
        &[
            (
                "src/poly.mini",
                "fn pick(flag) {\n    if (flag) { return 1; }\n    return \"one\";\n}\n",
            ),
            (
                "tests/poly_test.mini",
                "test both() { assertEquals(1, pick(true)); assertEquals(\"one\", pick(false)); }\n",
            ),
        ],
    );
    let out = scratch.path().join("out");
    let config = common::config(scratch.path(), &out);
    let outcome = discover(&config).unwrap();
    assert!(outcome.catalog.is_empty());
    let skip = outcome
        .skipped
        .iter()
        .find(|s| s.method == "src/poly.mini::pick/1")
        .expect("pick is skipped");
    assert_eq!(skip.reason, SkipReason::PolymorphicReturn);
}
