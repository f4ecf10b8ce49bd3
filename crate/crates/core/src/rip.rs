//! The two-stage infection/propagation analysis. Stage 1 observes the
//! immediate program state at the transformed method's boundary under the
//! original and stubbed bodies; an empty diff is a no-infection symptom.
//! Stage 2 observes the covering tests' expression values; an empty test
//! diff over an infected method is no-propagation, a non-empty one is a
//! weak oracle. Every undetected transformation ends up with exactly one
//! symptom or an explicit inconclusive verdict.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adapter::{CoverageData, MethodDescriptor, MethodId, ProjectAdapter, TestCase, TestId};
use crate::config::StageSelection;
use crate::error::Result;
use crate::instrument::{instrument_method, instrument_tests, SiteInfo};
use crate::observe::{get_diff, observe, InvariantState, RunIssues, StateDiff};
use crate::persist::copy_project;
use crate::transform::{apply_transformation, ExtremeTransformation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymptomClass {
    NoInfection,
    NoPropagation,
    WeakOracle,
    /// Could not be classified; the reason is recorded, never silent.
    Inconclusive,
    /// Stage 1 found an infection but stage 2 was not requested.
    InfectionPending,
}

impl SymptomClass {
    pub fn label(self) -> &'static str {
        match self {
            SymptomClass::NoInfection => "no-infection",
            SymptomClass::NoPropagation => "no-propagation",
            SymptomClass::WeakOracle => "weak-oracle",
            SymptomClass::Inconclusive => "inconclusive",
            SymptomClass::InfectionPending => "infection-pending",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTest {
    pub test_id: TestId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymptomDiagnosis {
    pub transformation_id: String,
    pub method: MethodId,
    pub stub_value: String,
    pub symptom: SymptomClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inconclusive_reason: Option<String>,
    pub covering_tests: BTreeSet<TestId>,
    pub method_diff: StateDiff,
    pub test_diff: StateDiff,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_tests: Vec<ExcludedTest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SymptomDiagnosis {
    /// The structural laws every diagnosis must satisfy.
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self.symptom {
            SymptomClass::NoInfection => {
                if !self.method_diff.is_empty() {
                    return Err("no-infection with a non-empty method diff".into());
                }
                if !self.test_diff.is_empty() {
                    return Err("no-infection with a non-empty test diff".into());
                }
            }
            SymptomClass::NoPropagation => {
                if self.method_diff.is_empty() {
                    return Err("no-propagation with an empty method diff".into());
                }
                if !self.test_diff.is_empty() {
                    return Err("no-propagation with a non-empty test diff".into());
                }
            }
            SymptomClass::WeakOracle => {
                if self.method_diff.is_empty() {
                    return Err("weak-oracle with an empty method diff".into());
                }
                if self.test_diff.is_empty() {
                    return Err("weak-oracle with an empty test diff".into());
                }
            }
            SymptomClass::Inconclusive => {
                if self.inconclusive_reason.is_none() {
                    return Err("inconclusive without a reason".into());
                }
            }
            SymptomClass::InfectionPending => {
                if self.method_diff.is_empty() {
                    return Err("infection-pending with an empty method diff".into());
                }
            }
        }
        Ok(())
    }
}

/// Everything one transformation's analysis produced, for persistence.
#[derive(Debug)]
pub struct AnalysisOutput {
    pub diagnosis: SymptomDiagnosis,
    pub sites: Vec<SiteInfo>,
    pub method_state_original: Option<InvariantState>,
    pub method_state_transformed: Option<InvariantState>,
    pub test_state_original: Option<InvariantState>,
    pub test_state_transformed: Option<InvariantState>,
}

pub struct AnalysisContext<'a> {
    pub adapter: &'a ProjectAdapter,
    pub runs: u32,
    pub stage: StageSelection,
    pub descriptors: &'a BTreeMap<MethodId, MethodDescriptor>,
    pub coverage: &'a CoverageData,
    pub tests: &'a BTreeMap<TestId, TestCase>,
}

/// Analyzer for all variants of one method; the expensive original-version
/// observations are computed once and shared across the variants.
pub struct MethodAnalyzer<'a> {
    ctx: &'a AnalysisContext<'a>,
    method_original: Option<(InvariantState, RunIssues)>,
    tests_original: Option<(InvariantState, RunIssues, Vec<SiteInfo>)>,
}

impl<'a> MethodAnalyzer<'a> {
    pub fn new(ctx: &'a AnalysisContext<'a>) -> MethodAnalyzer<'a> {
        MethodAnalyzer {
            ctx,
            method_original: None,
            tests_original: None,
        }
    }

    /// Classify one undetected transformation. Infrastructure errors are
    /// converted into inconclusive verdicts by the caller; errors returned
    /// here are unrecoverable IO problems.
    pub fn analyze(&mut self, t: &ExtremeTransformation) -> Result<AnalysisOutput> {
        let ctx = self.ctx;
        let covering = ctx.coverage.covering_tests(&t.method);
        let mut output = AnalysisOutput {
            diagnosis: SymptomDiagnosis {
                transformation_id: t.id.clone(),
                method: t.method.clone(),
                stub_value: t.stub_value.clone(),
                symptom: SymptomClass::Inconclusive,
                inconclusive_reason: None,
                covering_tests: covering.clone(),
                method_diff: StateDiff::default(),
                test_diff: StateDiff::default(),
                excluded_tests: Vec::new(),
                notes: Vec::new(),
            },
            sites: Vec::new(),
            method_state_original: None,
            method_state_transformed: None,
            test_state_original: None,
            test_state_transformed: None,
        };
        let diagnosis = &mut output.diagnosis;

        let Some(descriptor) = ctx.descriptors.get(&t.method) else {
            diagnosis.inconclusive_reason = Some("method descriptor not found".into());
            return Ok(output);
        };
        if covering.is_empty() {
            diagnosis.inconclusive_reason = Some("no covering tests".into());
            return Ok(output);
        }

        // Stage 1: immediate program state at the method boundary.
        if self.method_original.is_none() {
            let workspace = self.instrumented_method_workspace(descriptor, None)?;
            let outcome = observe(ctx.adapter, workspace.path(), &covering, ctx.runs)?;
            self.method_original = Some((outcome.state, outcome.issues));
        }
        let (original_state, original_issues) =
            self.method_original.as_ref().expect("computed above");

        if !original_issues.incomplete.is_empty() {
            diagnosis.inconclusive_reason = Some(format!(
                "degraded observation campaign: {}",
                original_issues.incomplete.join("; ")
            ));
            return Ok(output);
        }
        let mut allowed: BTreeSet<TestId> = covering.clone();
        for (test, (outcome, message)) in &original_issues.failing {
            allowed.remove(test);
            diagnosis.excluded_tests.push(ExcludedTest {
                test_id: test.clone(),
                reason: format!("instrumentation-sensitive (stage 1: {outcome:?}: {message})"),
            });
        }
        if allowed.is_empty() {
            diagnosis.inconclusive_reason =
                Some("all covering tests are instrumentation-sensitive".into());
            return Ok(output);
        }

        let workspace = self.instrumented_method_workspace(descriptor, Some(t))?;
        let transformed = observe(ctx.adapter, workspace.path(), &allowed, ctx.runs)?;
        if !transformed.issues.incomplete.is_empty() {
            diagnosis.inconclusive_reason = Some(format!(
                "degraded observation campaign: {}",
                transformed.issues.incomplete.join("; ")
            ));
            return Ok(output);
        }
        if !transformed.issues.failing.is_empty() {
            // The uninstrumented transformation passed its tests, so these
            // failures are detection evidence introduced by instrumentation;
            // surface them rather than classifying.
            let tests: Vec<&str> = transformed
                .issues
                .failing
                .keys()
                .map(String::as_str)
                .collect();
            diagnosis.notes.push(format!(
                "instrumented transformed run failed for: {}",
                tests.join(", ")
            ));
            diagnosis.inconclusive_reason = Some(
                "instrumented-detection: transformed run fails only under instrumentation".into(),
            );
            return Ok(output);
        }

        let original_filtered = restrict_tests(original_state, &allowed);
        let transformed_filtered = restrict_tests(&transformed.state, &allowed);
        diagnosis.method_diff = get_diff(&original_filtered, &transformed_filtered);
        output.method_state_original = Some(original_filtered);
        output.method_state_transformed = Some(transformed_filtered);

        if diagnosis.method_diff.is_empty() {
            diagnosis.symptom = SymptomClass::NoInfection;
            return Ok(output);
        }
        if ctx.stage == StageSelection::Infection {
            diagnosis.symptom = SymptomClass::InfectionPending;
            return Ok(output);
        }

        self.run_propagation_stage(t, descriptor, &covering, &mut output)?;
        Ok(output)
    }

    /// Finish a transformation whose infection stage already ran (an
    /// `infection-pending` diagnosis loaded from disk).
    pub fn resume_propagation(
        &mut self,
        t: &ExtremeTransformation,
        pending: SymptomDiagnosis,
    ) -> Result<AnalysisOutput> {
        let ctx = self.ctx;
        let covering = pending.covering_tests.clone();
        let mut output = AnalysisOutput {
            diagnosis: pending,
            sites: Vec::new(),
            method_state_original: None,
            method_state_transformed: None,
            test_state_original: None,
            test_state_transformed: None,
        };
        let Some(descriptor) = ctx.descriptors.get(&t.method) else {
            output.diagnosis.symptom = SymptomClass::Inconclusive;
            output.diagnosis.inconclusive_reason = Some("method descriptor not found".into());
            return Ok(output);
        };
        self.run_propagation_stage(t, descriptor, &covering, &mut output)?;
        Ok(output)
    }

    /// Stage 2 for a transformation already known to infect the state.
    pub fn run_propagation_stage(
        &mut self,
        t: &ExtremeTransformation,
        descriptor: &MethodDescriptor,
        covering: &BTreeSet<TestId>,
        output: &mut AnalysisOutput,
    ) -> Result<()> {
        let diagnosis = &mut output.diagnosis;
        let cases: Vec<TestCase> = covering
            .iter()
            .filter_map(|id| self.ctx.tests.get(id).cloned())
            .collect();
        if cases.len() != covering.len() {
            diagnosis.symptom = SymptomClass::Inconclusive;
            diagnosis.inconclusive_reason = Some("covering test metadata missing".into());
            return Ok(());
        }

        if self.tests_original.is_none() {
            let workspace = tempfile::Builder::new()
                .prefix("stubscope-ws-")
                .tempdir()
                .map_err(|e| crate::error::Error::io("tempdir", e))?;
            copy_project(&self.ctx.adapter.root, workspace.path())?;
            let sites = instrument_tests(workspace.path(), &cases)?;
            let outcome = observe(self.ctx.adapter, workspace.path(), covering, self.ctx.runs)?;
            self.tests_original = Some((outcome.state, outcome.issues, sites));
        }
        let (original_state, original_issues, sites) =
            self.tests_original.as_ref().expect("computed above");
        output.sites = sites.clone();

        if !original_issues.incomplete.is_empty() {
            diagnosis.symptom = SymptomClass::Inconclusive;
            diagnosis.inconclusive_reason = Some(format!(
                "degraded observation campaign: {}",
                original_issues.incomplete.join("; ")
            ));
            return Ok(());
        }
        let mut allowed: BTreeSet<TestId> = covering.clone();
        for (test, (outcome, message)) in &original_issues.failing {
            allowed.remove(test);
            diagnosis.excluded_tests.push(ExcludedTest {
                test_id: test.clone(),
                reason: format!("instrumentation-sensitive (stage 2: {outcome:?}: {message})"),
            });
        }
        if allowed.is_empty() {
            diagnosis.symptom = SymptomClass::Inconclusive;
            diagnosis.inconclusive_reason =
                Some("all covering tests are instrumentation-sensitive".into());
            return Ok(());
        }

        let workspace = tempfile::Builder::new()
            .prefix("stubscope-ws-")
            .tempdir()
            .map_err(|e| crate::error::Error::io("tempdir", e))?;
        copy_project(&self.ctx.adapter.root, workspace.path())?;
        apply_transformation(workspace.path(), t, descriptor)?;
        instrument_tests(workspace.path(), &cases)?;
        let transformed = observe(self.ctx.adapter, workspace.path(), &allowed, self.ctx.runs)?;
        if !transformed.issues.incomplete.is_empty() {
            diagnosis.symptom = SymptomClass::Inconclusive;
            diagnosis.inconclusive_reason = Some(format!(
                "degraded observation campaign: {}",
                transformed.issues.incomplete.join("; ")
            ));
            return Ok(());
        }
        if !transformed.issues.failing.is_empty() {
            let tests: Vec<&str> = transformed
                .issues
                .failing
                .keys()
                .map(String::as_str)
                .collect();
            diagnosis.notes.push(format!(
                "instrumented transformed run failed for: {}",
                tests.join(", ")
            ));
            diagnosis.symptom = SymptomClass::Inconclusive;
            diagnosis.inconclusive_reason = Some(
                "instrumented-detection: transformed run fails only under instrumentation".into(),
            );
            return Ok(());
        }

        let original_filtered = restrict_tests(original_state, &allowed);
        let transformed_filtered = restrict_tests(&transformed.state, &allowed);
        diagnosis.test_diff = get_diff(&original_filtered, &transformed_filtered);
        output.test_state_original = Some(original_filtered);
        output.test_state_transformed = Some(transformed_filtered);

        diagnosis.symptom = if diagnosis.test_diff.is_empty() {
            SymptomClass::NoPropagation
        } else {
            SymptomClass::WeakOracle
        };
        Ok(())
    }

    fn instrumented_method_workspace(
        &self,
        descriptor: &MethodDescriptor,
        transformation: Option<&ExtremeTransformation>,
    ) -> Result<tempfile::TempDir> {
        let workspace = tempfile::Builder::new()
            .prefix("stubscope-ws-")
            .tempdir()
            .map_err(|e| crate::error::Error::io("tempdir", e))?;
        copy_project(&self.ctx.adapter.root, workspace.path())?;
        if let Some(t) = transformation {
            apply_transformation(workspace.path(), t, descriptor)?;
        }
        instrument_method(workspace.path(), descriptor)?;
        Ok(workspace)
    }
}

fn restrict_tests(state: &InvariantState, allowed: &BTreeSet<TestId>) -> InvariantState {
    InvariantState {
        runs: state.runs,
        entries: state
            .entries
            .iter()
            .filter(|(k, _)| allowed.contains(&k.test))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    }
}

/// Check the partition law over a set of classifications: every undetected
/// transformation appears exactly once and carries a valid diagnosis.
pub fn check_partition(
    undetected: &BTreeSet<String>,
    diagnoses: &[SymptomDiagnosis],
) -> std::result::Result<(), String> {
    let mut seen = BTreeSet::new();
    for d in diagnoses {
        if !seen.insert(d.transformation_id.clone()) {
            return Err(format!("duplicate diagnosis for {}", d.transformation_id));
        }
        if !undetected.contains(&d.transformation_id) {
            return Err(format!(
                "diagnosis for unknown transformation {}",
                d.transformation_id
            ));
        }
        d.validate()
            .map_err(|e| format!("{}: {e}", d.transformation_id))?;
    }
    if seen.len() != undetected.len() {
        let missing: Vec<&String> = undetected.difference(&seen).collect();
        return Err(format!("missing diagnoses: {missing:?}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::{DiffEntry, ObsKey};

    fn base(symptom: SymptomClass) -> SymptomDiagnosis {
        SymptomDiagnosis {
            transformation_id: "t#0".into(),
            method: "m".into(),
            stub_value: "true".into(),
            symptom,
            inconclusive_reason: None,
            covering_tests: BTreeSet::new(),
            method_diff: StateDiff::default(),
            test_diff: StateDiff::default(),
            excluded_tests: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn one_entry_diff() -> StateDiff {
        StateDiff {
            entries: vec![DiffEntry {
                key: ObsKey {
                    test: "t".into(),
                    point: "m:x".into(),
                    invocation: 0,
                    path: "this.v".into(),
                },
                original: "1".into(),
                transformed: "0".into(),
            }],
            locus: ["this".to_string()].into(),
            asymmetric_keys: 0,
        }
    }

    #[test]
    fn validation_enforces_the_partition_laws() {
        assert!(base(SymptomClass::NoInfection).validate().is_ok());

        let mut d = base(SymptomClass::NoInfection);
        d.method_diff = one_entry_diff();
        assert!(d.validate().is_err());

        let mut d = base(SymptomClass::NoPropagation);
        d.method_diff = one_entry_diff();
        assert!(d.validate().is_ok());
        d.test_diff = one_entry_diff();
        assert!(d.validate().is_err());

        let mut d = base(SymptomClass::WeakOracle);
        d.method_diff = one_entry_diff();
        d.test_diff = one_entry_diff();
        assert!(d.validate().is_ok());

        let d = base(SymptomClass::Inconclusive);
        assert!(d.validate().is_err(), "inconclusive requires a reason");
    }

    #[test]
    fn partition_check_spots_missing_and_duplicates() {
        let undetected: BTreeSet<String> = ["t#0".to_string(), "t#1".to_string()].into();
        let mut d0 = base(SymptomClass::NoInfection);
        d0.transformation_id = "t#0".into();
        assert!(check_partition(&undetected, &[d0.clone()]).is_err());
        let mut d1 = base(SymptomClass::NoInfection);
        d1.transformation_id = "t#1".into();
        assert!(check_partition(&undetected, &[d0.clone(), d1.clone()]).is_ok());
        assert!(check_partition(&undetected, &[d0.clone(), d0, d1]).is_err());
    }
}
