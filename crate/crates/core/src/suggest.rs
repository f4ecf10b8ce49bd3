//! Suggestion synthesis: one actionable improvement per diagnosed
//! transformation, rendered from fixed templates over persisted evidence.
//! No test execution happens here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adapter::{MethodId, TestId};
use crate::analytics::CampaignSummary;
use crate::error::Result;
use crate::insight::{EntryPoints, StackDistanceSample};
use crate::instrument::SiteInfo;
use crate::observe::StateDiff;
#[cfg(test)]
use crate::rip::SymptomClass;
use crate::rip::SymptomDiagnosis;

pub const SUGGESTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    NewInput,
    NewTest,
    NewAssertion,
    RefactoringNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionSite {
    pub test_id: TestId,
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub snippet: String,
    pub property_path: String,
    pub expected_value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub schema_version: u32,
    pub transformation_id: String,
    pub method: MethodId,
    pub stub_value: String,
    pub symptom: String,
    pub template: TemplateKind,
    pub seed_tests: Vec<TestId>,
    pub target_methods: Vec<MethodId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assertion_site: Option<AssertionSite>,
    pub narrative: String,
}

fn seeds(d: &SymptomDiagnosis) -> Vec<TestId> {
    d.covering_tests.iter().cloned().collect()
}

fn short_name(method: &MethodId) -> String {
    method
        .rsplit("::")
        .next()
        .map(|tail| tail.split('/').next().unwrap_or(tail).to_string())
        .unwrap_or_else(|| method.clone())
}

fn stub_phrase(stub_value: &str) -> String {
    if stub_value == crate::transform::VOID_STUB {
        "emptying its body".to_string()
    } else {
        format!("stubbing its body to `return {stub_value};`")
    }
}

/// The full diff evidence table embedded in narratives.
fn diff_table(diff: &StateDiff) -> String {
    let mut out = String::new();
    for e in &diff.entries {
        out.push_str(&format!(
            "  - {} @ {} (invocation {}): `{}` was `{}`, now `{}`\n",
            e.key.test, e.key.point, e.key.invocation, e.key.path, e.original, e.transformed
        ));
    }
    if diff.asymmetric_keys > 0 {
        out.push_str(&format!(
            "  - ({} propert{} present on only one side)\n",
            diff.asymmetric_keys,
            if diff.asymmetric_keys == 1 {
                "y"
            } else {
                "ies"
            }
        ));
    }
    out
}

fn list_ids(ids: &[MethodId]) -> String {
    ids.iter()
        .map(|id| format!("`{id}`"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// No-infection: the covering tests never make the stub observable; seed new
/// inputs from them.
pub fn suggest_no_infection(d: &SymptomDiagnosis) -> Suggestion {
    let seeds = seeds(d);
    let name = short_name(&d.method);
    let narrative = format!(
        "{} leaves the observed program state identical on every covering run: \
the current inputs cannot tell the stub and the real body apart. \
Starting from {}, create a new test case whose input makes `{name}` \
return a different value or produce a different side effect.",
        capitalize(&stub_phrase(&d.stub_value)),
        seeds
            .iter()
            .map(|t| format!("`{t}`"))
            .collect::<Vec<_>>()
            .join(", "),
    );
    Suggestion {
        schema_version: SUGGESTION_SCHEMA_VERSION,
        transformation_id: d.transformation_id.clone(),
        method: d.method.clone(),
        stub_value: d.stub_value.clone(),
        symptom: d.symptom.label().to_string(),
        template: TemplateKind::NewInput,
        seed_tests: seeds,
        target_methods: Vec::new(),
        assertion_site: None,
        narrative,
    }
}

/// No-propagation: the state corruption is masked before it reaches test
/// code; new tests must target the method (or its closest accessible
/// callers) directly.
pub fn suggest_no_propagation(
    d: &SymptomDiagnosis,
    entry_points: &EntryPoints,
    sample: Option<&StackDistanceSample>,
) -> Suggestion {
    let seeds = seeds(d);
    let mut narrative = format!(
        "{} corrupts the immediate program state, but the corruption is masked \
before any test-visible value changes.\nObserved state differences:\n{}",
        capitalize(&stub_phrase(&d.stub_value)),
        diff_table(&d.method_diff),
    );
    if let Some(sample) = sample {
        let mut chain = vec![sample.test_id.clone()];
        chain.extend(sample.chain.iter().cloned());
        narrative.push_str(&format!(
            "Shortest observed call chain ({} frame{}): {}\n",
            sample.distance,
            if sample.distance == 1 { "" } else { "s" },
            chain.join(" -> ")
        ));
    }
    let template;
    if entry_points.methods.is_empty() {
        template = TemplateKind::RefactoringNote;
        narrative.push_str(
            "No externally invokable method reaches this one; covering it requires \
refactoring (for example widening its visibility or extracting it).",
        );
    } else {
        template = TemplateKind::NewTest;
        narrative.push_str(&format!(
            "Write a new test case that targets {} directly.",
            list_ids(&entry_points.methods)
        ));
        if entry_points.capped {
            narrative.push_str(" (entry-point search was depth-capped and may be incomplete)");
        }
    }
    narrative.push_str(&format!(
        "\nTests currently executing the method: {}.",
        seeds
            .iter()
            .map(|t| format!("`{t}`"))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    Suggestion {
        schema_version: SUGGESTION_SCHEMA_VERSION,
        transformation_id: d.transformation_id.clone(),
        method: d.method.clone(),
        stub_value: d.stub_value.clone(),
        symptom: d.symptom.label().to_string(),
        template,
        seed_tests: seeds,
        target_methods: entry_points.methods.clone(),
        assertion_site: None,
        narrative,
    }
}

/// Property leaves that are directly assertable on the expression value
/// itself, without going through a field.
fn is_direct_leaf(path: &str) -> bool {
    matches!(path, "value" | "null" | "size" | "length")
}

/// Weak-oracle: the corruption reaches a test expression; pick the site
/// closest to the test's top level and hand the developer the exact
/// property and expected value to assert, via field observers when the
/// differing property is an inaccessible field.
pub fn suggest_weak_oracle(
    d: &SymptomDiagnosis,
    sites: &[SiteInfo],
    observers_for: &dyn Fn(&str) -> Vec<MethodId>,
) -> Suggestion {
    let site_map: BTreeMap<&str, &SiteInfo> =
        sites.iter().map(|s| (s.site_id.as_str(), s)).collect();
    // Rank candidate diff entries: smallest expression nesting depth first,
    // then earliest source position, then property path.
    let mut candidates: Vec<(&crate::observe::DiffEntry, &SiteInfo)> = d
        .test_diff
        .entries
        .iter()
        .filter_map(|e| site_map.get(e.key.point.as_str()).map(|s| (e, *s)))
        .collect();
    candidates.sort_by_key(|(e, s)| (s.depth, s.lo, e.key.path.clone()));

    let seeds = seeds(d);
    let base = Suggestion {
        schema_version: SUGGESTION_SCHEMA_VERSION,
        transformation_id: d.transformation_id.clone(),
        method: d.method.clone(),
        stub_value: d.stub_value.clone(),
        symptom: d.symptom.label().to_string(),
        template: TemplateKind::NewAssertion,
        seed_tests: seeds,
        target_methods: Vec::new(),
        assertion_site: None,
        narrative: String::new(),
    };

    let Some((entry, site)) = candidates.first() else {
        // A weak oracle without a mappable site should not happen; fall
        // back to a refactoring note rather than fabricating a location.
        return Suggestion {
            template: TemplateKind::RefactoringNote,
            narrative: format!(
                "{} propagates to the test code but no assertable expression site could \
be resolved.\nObserved test-state differences:\n{}",
                capitalize(&stub_phrase(&d.stub_value)),
                diff_table(&d.test_diff)
            ),
            ..base
        };
    };

    let location = format!("{}:{}:{}", site.file, site.line, site.col);
    let evidence = diff_table(&d.test_diff);
    if is_direct_leaf(&entry.key.path) {
        let narrative = format!(
            "{} changes the value of `{}` at {location} (property `{}`: expected \
`{}`, observed `{}` under the stub), but no assertion checks it. Add an \
assertion at that location expecting `{}`.\nObserved test-state differences:\n{evidence}",
            capitalize(&stub_phrase(&d.stub_value)),
            site.snippet,
            entry.key.path,
            entry.original,
            entry.transformed,
            entry.original,
        );
        return Suggestion {
            assertion_site: Some(AssertionSite {
                test_id: site.test_id.clone(),
                file: site.file.clone(),
                line: site.line,
                col: site.col,
                snippet: site.snippet.clone(),
                property_path: entry.key.path.clone(),
                expected_value: entry.original.clone(),
            }),
            narrative,
            ..base
        };
    }

    // The differing property is a field of the expression's value.
    let field = entry
        .key
        .path
        .split('.')
        .next()
        .unwrap_or(&entry.key.path)
        .to_string();
    let observers = observers_for(&field);
    if observers.is_empty() {
        let narrative = format!(
            "{} changes field `{field}` of the value `{}` at {location} (expected \
`{}`, observed `{}`), but the field is not accessible from test code and no \
externally invokable method exposes it. Verifying this effect requires a code \
change (an accessor or wider visibility).\nObserved test-state differences:\n{evidence}",
            capitalize(&stub_phrase(&d.stub_value)),
            site.snippet,
            entry.original,
            entry.transformed,
        );
        return Suggestion {
            template: TemplateKind::RefactoringNote,
            narrative,
            ..base
        };
    }
    let narrative = format!(
        "{} changes field `{field}` of the value `{}` at {location}: expected \
`{}`, observed `{}` under the stub, and no assertion checks it. Add an assertion \
on that value through {} expecting `{}`.\nObserved test-state differences:\n{evidence}",
        capitalize(&stub_phrase(&d.stub_value)),
        site.snippet,
        entry.original,
        entry.transformed,
        list_ids(&observers),
        entry.original,
    );
    Suggestion {
        target_methods: observers,
        assertion_site: Some(AssertionSite {
            test_id: site.test_id.clone(),
            file: site.file.clone(),
            line: site.line,
            col: site.col,
            snippet: site.snippet.clone(),
            property_path: entry.key.path.clone(),
            expected_value: entry.original.clone(),
        }),
        narrative,
        ..base
    }
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Inconclusive or pending diagnoses, surfaced but not turned into advice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnresolvedEntry {
    pub transformation_id: String,
    pub symptom: String,
    pub reason: String,
}

/// Render the human-readable report. Grouped by symptom, stable ordering;
/// byte-identical output for identical evidence.
pub fn render_report(
    project_label: &str,
    summary: &CampaignSummary,
    suggestions: &[Suggestion],
    unresolved: &[UnresolvedEntry],
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# Test improvement report for {project_label}\n\n"
    ));
    out.push_str(&format!(
        "{} extreme transformation(s): {} detected, {} undetected.\n\n",
        summary.total_transformations, summary.detected, summary.undetected
    ));
    if suggestions.is_empty() && unresolved.is_empty() {
        out.push_str("No undetected transformations - nothing to improve.\n");
        return out;
    }

    let sections: [(&str, &str); 3] = [
        ("no-infection", "No infection: inputs never expose the stub"),
        (
            "no-propagation",
            "No propagation: corruption is masked before the test",
        ),
        (
            "weak-oracle",
            "Weak oracle: corruption reaches the test but is not asserted",
        ),
    ];
    for (key, title) in sections {
        let group: Vec<&Suggestion> = suggestions.iter().filter(|s| s.symptom == key).collect();
        if group.is_empty() {
            continue;
        }
        out.push_str(&format!("## {title}\n\n"));
        for s in group {
            out.push_str(&format!("### `{}`\n\n", s.transformation_id));
            out.push_str(&format!("{}\n\n", s.narrative));
            if let Some(site) = &s.assertion_site {
                out.push_str(&format!(
                    "Assertion site: {}:{}:{} on `{}`, property `{}`, expected `{}`.\n\n",
                    site.file,
                    site.line,
                    site.col,
                    site.snippet,
                    site.property_path,
                    site.expected_value
                ));
            }
        }
    }
    if !unresolved.is_empty() {
        out.push_str("## Not classified\n\n");
        for u in unresolved {
            out.push_str(&format!(
                "- `{}` ({}): {}\n",
                u.transformation_id, u.symptom, u.reason
            ));
        }
        out.push('\n');
    }
    out
}

/// Parse the machine-readable catalog back into suggestions.
pub fn parse_catalog(text: &str) -> Result<Vec<Suggestion>> {
    crate::persist::parse_jsonl(text, "suggestions.jsonl")
}
