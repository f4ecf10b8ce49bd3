//! Campaign-level statistics: symptom proportions, where infections were
//! observed (result/arguments/receiver, non-exclusive), and stack-distance
//! summaries per symptom.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::insight::StackDistanceSample;
#[cfg(test)]
use crate::rip::SymptomClass;
use crate::rip::SymptomDiagnosis;
use crate::transform::{Detection, ExtremeTransformation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub transformation_id: String,
    pub symptom: String,
    pub distance: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub total_transformations: usize,
    pub detected: usize,
    pub undetected: usize,
    pub unknown_detection: usize,
    /// Counts per symptom label (including inconclusive/pending).
    pub symptom_counts: BTreeMap<String, usize>,
    /// Transformations whose method-state diff is non-empty.
    pub infected: usize,
    /// Detected transformations where at least one covering test errored
    /// or timed out instead of failing an assertion.
    #[serde(default)]
    pub error_flagged_detections: usize,
    /// Infection loci, non-exclusive: one transformation may count in
    /// several.
    pub locus_result: usize,
    pub locus_arguments: usize,
    pub locus_receiver: usize,
    pub distances: Vec<DistanceRow>,
}

pub fn summarize(
    catalog: &[ExtremeTransformation],
    diagnoses: &[SymptomDiagnosis],
    samples: &[StackDistanceSample],
) -> CampaignSummary {
    let mut summary = CampaignSummary {
        total_transformations: catalog.len(),
        detected: catalog
            .iter()
            .filter(|t| t.detection == Detection::Detected)
            .count(),
        undetected: catalog
            .iter()
            .filter(|t| t.detection == Detection::Undetected)
            .count(),
        unknown_detection: catalog
            .iter()
            .filter(|t| t.detection == Detection::Unknown)
            .count(),
        error_flagged_detections: catalog
            .iter()
            .filter(|t| t.detection == Detection::Detected && !t.error_detections.is_empty())
            .count(),
        ..CampaignSummary::default()
    };

    let sample_by_id: BTreeMap<&str, &StackDistanceSample> = samples
        .iter()
        .map(|s| (s.transformation_id.as_str(), s))
        .collect();

    for d in diagnoses {
        *summary
            .symptom_counts
            .entry(d.symptom.label().to_string())
            .or_insert(0) += 1;
        if !d.method_diff.is_empty() {
            summary.infected += 1;
            let mut in_result = false;
            let mut in_args = false;
            let mut in_receiver = false;
            for entry in &d.method_diff.entries {
                match entry.key.path.split('.').next().unwrap_or("") {
                    "result" => in_result = true,
                    "this" => in_receiver = true,
                    root if root.starts_with("arg") => in_args = true,
                    _ => {}
                }
            }
            summary.locus_result += in_result as usize;
            summary.locus_arguments += in_args as usize;
            summary.locus_receiver += in_receiver as usize;
        }
        if let Some(sample) = sample_by_id.get(d.transformation_id.as_str()) {
            summary.distances.push(DistanceRow {
                transformation_id: d.transformation_id.clone(),
                symptom: d.symptom.label().to_string(),
                distance: sample.distance,
            });
        }
    }
    summary
        .distances
        .sort_by(|a, b| a.transformation_id.cmp(&b.transformation_id));
    summary
}

/// Plain-text summary artifact.
pub fn render_summary(summary: &CampaignSummary) -> String {
    let mut out = String::new();
    out.push_str("campaign summary\n");
    out.push_str("================\n");
    out.push_str(&format!(
        "transformations: {} total / {} detected / {} undetected / {} unknown\n",
        summary.total_transformations,
        summary.detected,
        summary.undetected,
        summary.unknown_detection
    ));
    out.push_str("symptoms:");
    if summary.symptom_counts.is_empty() {
        out.push_str(" none");
    }
    let classified: usize = summary.symptom_counts.values().sum();
    for (label, count) in &summary.symptom_counts {
        match (100 * count).checked_div(classified) {
            Some(pct) => out.push_str(&format!(" {label}={count} ({pct}%)")),
            None => out.push_str(&format!(" {label}={count}")),
        }
    }
    out.push('\n');
    out.push_str(&format!(
        "transformations infecting the program state: {}\n",
        summary.infected
    ));
    out.push_str(&format!(
        "detections involving test errors or timeouts: {}\n",
        summary.error_flagged_detections
    ));
    out.push_str(&format!(
        "infection locus (non-exclusive): result={} arguments={} receiver={}\n",
        summary.locus_result, summary.locus_arguments, summary.locus_receiver
    ));
    out.push_str("stack distance by symptom:\n");
    let mut by_symptom: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for row in &summary.distances {
        by_symptom
            .entry(row.symptom.as_str())
            .or_default()
            .push(row.distance);
    }
    if by_symptom.is_empty() {
        out.push_str("  (no samples)\n");
    }
    for (symptom, mut distances) in by_symptom {
        distances.sort_unstable();
        let min = distances.first().copied().unwrap_or(0);
        let max = distances.last().copied().unwrap_or(0);
        let mean = distances.iter().map(|&d| d as f64).sum::<f64>() / distances.len() as f64;
        out.push_str(&format!(
            "  {symptom}: n={} min={min} max={max} mean={mean:.2}\n",
            distances.len()
        ));
    }
    out
}

/// Plot-ready distance table (TSV: one row per undetected transformation).
pub fn render_distance_table(summary: &CampaignSummary) -> String {
    let mut out = String::from("transformation_id\tsymptom\tstack_distance\n");
    for row in &summary.distances {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            row.transformation_id, row.symptom, row.distance
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::{DiffEntry, ObsKey, StateDiff};
    use std::collections::BTreeSet;

    fn transformation(id: &str, detection: Detection) -> ExtremeTransformation {
        ExtremeTransformation {
            id: id.into(),
            method: "m".into(),
            stub_value: "true".into(),
            variant_index: 0,
            detection,
            error_detections: Vec::new(),
        }
    }

    fn diagnosis(id: &str, symptom: SymptomClass, paths: &[&str]) -> SymptomDiagnosis {
        let entries = paths
            .iter()
            .map(|p| DiffEntry {
                key: ObsKey {
                    test: "t".into(),
                    point: "m:x".into(),
                    invocation: 0,
                    path: (*p).into(),
                },
                original: "1".into(),
                transformed: "0".into(),
            })
            .collect();
        SymptomDiagnosis {
            transformation_id: id.into(),
            method: "m".into(),
            stub_value: "true".into(),
            symptom,
            inconclusive_reason: (symptom == SymptomClass::Inconclusive).then(|| "x".into()),
            covering_tests: BTreeSet::new(),
            method_diff: StateDiff {
                entries,
                locus: BTreeSet::new(),
                asymmetric_keys: 0,
            },
            test_diff: StateDiff::default(),
            excluded_tests: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn sample(id: &str, distance: u32) -> StackDistanceSample {
        StackDistanceSample {
            transformation_id: id.into(),
            method: "m".into(),
            distance,
            test_id: "t".into(),
            chain: vec![],
        }
    }

    #[test]
    fn counts_and_loci_are_aggregated() {
        let catalog = vec![
            transformation("a#0", Detection::Detected),
            transformation("b#0", Detection::Undetected),
            transformation("c#0", Detection::Undetected),
            transformation("d#0", Detection::Undetected),
        ];
        let diagnoses = vec![
            diagnosis("b#0", SymptomClass::NoInfection, &[]),
            // Diff touching both result and receiver: counted in both loci.
            diagnosis(
                "c#0",
                SymptomClass::NoPropagation,
                &["result.value", "this.v"],
            ),
            diagnosis("d#0", SymptomClass::WeakOracle, &["arg0.value"]),
        ];
        let samples = vec![sample("c#0", 2), sample("d#0", 5)];
        let summary = summarize(&catalog, &diagnoses, &samples);
        assert_eq!(summary.total_transformations, 4);
        assert_eq!((summary.detected, summary.undetected), (1, 3));
        assert_eq!(summary.symptom_counts["no-infection"], 1);
        assert_eq!(summary.infected, 2);
        assert_eq!(
            (
                summary.locus_result,
                summary.locus_arguments,
                summary.locus_receiver
            ),
            (1, 1, 1)
        );
        assert_eq!(summary.distances.len(), 2);
        // Locus tallies stay bounded by the infected population.
        assert!(summary.locus_result <= summary.infected);
        assert!(summary.locus_arguments <= summary.infected);
        assert!(summary.locus_receiver <= summary.infected);
    }

    #[test]
    fn empty_campaign_is_all_zero() {
        let summary = summarize(&[], &[], &[]);
        assert_eq!(summary.total_transformations, 0);
        assert_eq!(summary.infected, 0);
        assert!(summary.symptom_counts.is_empty());
        let text = render_summary(&summary);
        assert!(text.contains("0 total"));
    }

    #[test]
    fn distance_table_is_tab_separated() {
        let catalog = vec![transformation("b#0", Detection::Undetected)];
        let diagnoses = vec![diagnosis("b#0", SymptomClass::NoPropagation, &["this.v"])];
        let samples = vec![sample("b#0", 3)];
        let summary = summarize(&catalog, &diagnoses, &samples);
        let table = render_distance_table(&summary);
        assert_eq!(
            table,
            "transformation_id\tsymptom\tstack_distance\nb#0\tno-propagation\t3\n"
        );
    }
}
