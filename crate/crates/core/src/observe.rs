//! Observation aggregation: N repeated instrumented runs are folded into a
//! cross-run-invariant state (properties whose value was identical in every
//! run), and two invariant states are compared into a diff. Properties that
//! change between runs of the *same* program version — clocks, fresh paths,
//! randomness — can never reach a diff this way.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::{ProjectAdapter, RunOptions, TestId, TestOutcomeKind};
use crate::error::Result;
use crate::runner::ObsLogRecord;

/// Identity of one observed property: which test, which observation point,
/// which invocation of that point, which property path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsKey {
    pub test: TestId,
    pub point: String,
    pub invocation: u64,
    pub path: String,
}

/// Properties that held the same value in every one of the N runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantState {
    pub runs: u32,
    pub entries: BTreeMap<ObsKey, String>,
}

/// Persisted form of one invariant-state entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub test: TestId,
    pub point: String,
    pub invocation: u64,
    pub path: String,
    pub value: String,
}

impl InvariantState {
    pub fn to_records(&self) -> Vec<InvariantRecord> {
        self.entries
            .iter()
            .map(|(k, v)| InvariantRecord {
                test: k.test.clone(),
                point: k.point.clone(),
                invocation: k.invocation,
                path: k.path.clone(),
                value: v.clone(),
            })
            .collect()
    }

    pub fn from_records(runs: u32, records: Vec<InvariantRecord>) -> InvariantState {
        let entries = records
            .into_iter()
            .map(|r| {
                (
                    ObsKey {
                        test: r.test,
                        point: r.point,
                        invocation: r.invocation,
                        path: r.path,
                    },
                    r.value,
                )
            })
            .collect();
        InvariantState { runs, entries }
    }
}

/// Key a raw observation record.
fn key_of(record: &ObsLogRecord) -> ObsKey {
    ObsKey {
        test: record.test_id.clone(),
        point: record.point_id.clone(),
        invocation: record.invocation_index,
        path: record.path.clone(),
    }
}

/// Fold per-run observation maps into the invariant state: keep exactly the
/// keys present in every run with an identical value. Keys whose *presence*
/// varies across runs are dropped too.
pub fn fold_runs(per_run: Vec<BTreeMap<ObsKey, String>>) -> InvariantState {
    let runs = per_run.len() as u32;
    let mut iter = per_run.into_iter();
    let Some(mut acc) = iter.next() else {
        return InvariantState {
            runs: 0,
            entries: BTreeMap::new(),
        };
    };
    for run_map in iter {
        acc.retain(|key, value| run_map.get(key) == Some(value));
    }
    InvariantState { runs, entries: acc }
}

fn records_to_map(records: &[ObsLogRecord]) -> BTreeMap<ObsKey, String> {
    records
        .iter()
        .map(|r| (key_of(r), r.value.clone()))
        .collect()
}

/// Problems encountered while observing: tests that did not pass (per run),
/// and runner-level incompletions. A degraded campaign is surfaced, never
/// silently classified.
#[derive(Debug, Clone, Default)]
pub struct RunIssues {
    /// test id -> first non-pass outcome seen across the N runs.
    pub failing: BTreeMap<TestId, (TestOutcomeKind, String)>,
    pub incomplete: Vec<String>,
}

impl RunIssues {
    pub fn is_clean(&self) -> bool {
        self.failing.is_empty() && self.incomplete.is_empty()
    }
}

#[derive(Debug)]
pub struct ObserveOutcome {
    pub state: InvariantState,
    pub issues: RunIssues,
}

/// Execute the given tests N times against an instrumented workspace and
/// fold the observation logs into the invariant state.
pub fn observe(
    adapter: &ProjectAdapter,
    workspace: &Path,
    tests: &BTreeSet<TestId>,
    runs: u32,
) -> Result<ObserveOutcome> {
    let mut per_run = Vec::with_capacity(runs as usize);
    let mut issues = RunIssues::default();
    for run_index in 0..runs {
        let artifacts = adapter.run_tests(
            workspace,
            Some(tests),
            &RunOptions {
                traced: false,
                observe_run_index: Some(run_index),
            },
        )?;
        if let Some(reason) = &artifacts.report.incomplete {
            issues.incomplete.push(format!("run {run_index}: {reason}"));
        }
        for result in artifacts.report.non_passing() {
            issues
                .failing
                .entry(result.test_id.clone())
                .or_insert_with(|| (result.outcome, result.message.clone().unwrap_or_default()));
        }
        per_run.push(records_to_map(&artifacts.observations));
    }
    Ok(ObserveOutcome {
        state: fold_runs(per_run),
        issues,
    })
}

/// One differing property between the original and transformed versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    #[serde(flatten)]
    pub key: ObsKey,
    pub original: String,
    pub transformed: String,
}

/// Difference between two invariant states: keys present on both sides with
/// unequal values. One-sided keys are counted, not diffed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDiff {
    pub entries: Vec<DiffEntry>,
    /// Where the differences were observed: `this` / `argK` / `result`
    /// roots for method points, site ids for test points.
    pub locus: BTreeSet<String>,
    pub asymmetric_keys: usize,
}

impl StateDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn locus_of(key: &ObsKey) -> String {
    if key.point.starts_with("m:") {
        let root = key.path.split('.').next().unwrap_or("");
        if root == "this" || root == "result" || root.starts_with("arg") {
            return root.to_string();
        }
    }
    key.point.clone()
}

/// Compare two invariant states (original first).
pub fn get_diff(original: &InvariantState, transformed: &InvariantState) -> StateDiff {
    let mut diff = StateDiff::default();
    for (key, value) in &original.entries {
        match transformed.entries.get(key) {
            Some(other) if other != value => {
                diff.locus.insert(locus_of(key));
                diff.entries.push(DiffEntry {
                    key: key.clone(),
                    original: value.clone(),
                    transformed: other.clone(),
                });
            }
            Some(_) => {}
            None => diff.asymmetric_keys += 1,
        }
    }
    diff.asymmetric_keys += transformed
        .entries
        .keys()
        .filter(|k| !original.entries.contains_key(*k))
        .count();
    diff
}

/// Alignment of method invocations between two raw logs: the k-th
/// invocation of a point in one version pairs with the k-th invocation in
/// the other; unpaired trailing invocations are not comparable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InvocationRef {
    pub test: TestId,
    pub point: String,
    pub invocation: u64,
}

#[derive(Debug, Default)]
pub struct InvocationAlignment {
    pub pairs: Vec<InvocationRef>,
    pub unmatched: usize,
}

pub fn match_invocations(
    original: &[ObsLogRecord],
    transformed: &[ObsLogRecord],
) -> InvocationAlignment {
    let collect = |records: &[ObsLogRecord]| -> BTreeSet<InvocationRef> {
        records
            .iter()
            .map(|r| InvocationRef {
                test: r.test_id.clone(),
                point: r.point_id.clone(),
                invocation: r.invocation_index,
            })
            .collect()
    };
    let a = collect(original);
    let b = collect(transformed);
    InvocationAlignment {
        pairs: a.intersection(&b).cloned().collect(),
        unmatched: a.symmetric_difference(&b).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(test: &str, point: &str, invocation: u64, path: &str) -> ObsKey {
        ObsKey {
            test: test.into(),
            point: point.into(),
            invocation,
            path: path.into(),
        }
    }

    fn state(pairs: &[(ObsKey, &str)]) -> InvariantState {
        InvariantState {
            runs: 1,
            entries: pairs
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
        }
    }

    #[test]
    fn diff_of_identical_states_is_empty() {
        let s = state(&[(key("t", "m:x", 0, "this.v"), "1")]);
        let diff = get_diff(&s, &s);
        assert!(diff.is_empty());
        assert_eq!(diff.asymmetric_keys, 0);
    }

    #[test]
    fn diff_reports_changed_values() {
        let s1 = state(&[(key("t", "m:x", 0, "this.v"), "1")]);
        let s2 = state(&[(key("t", "m:x", 0, "this.v"), "2")]);
        let diff = get_diff(&s1, &s2);
        assert_eq!(diff.entries.len(), 1);
        assert_eq!(
            (
                diff.entries[0].original.as_str(),
                diff.entries[0].transformed.as_str()
            ),
            ("1", "2")
        );
        assert_eq!(diff.locus.iter().collect::<Vec<_>>(), vec!["this"]);
    }

    #[test]
    fn one_sided_keys_are_asymmetric_not_diffs() {
        let s1 = state(&[(key("t", "m:x", 0, "result.value"), "1")]);
        let s2 = state(&[]);
        let diff = get_diff(&s1, &s2);
        assert!(diff.is_empty());
        assert_eq!(diff.asymmetric_keys, 1);
    }

    #[test]
    fn diff_key_sets_are_symmetric() {
        let s1 = state(&[
            (key("t", "m:x", 0, "this.v"), "1"),
            (key("t", "m:x", 0, "result.value"), "true"),
            (key("t", "m:x", 1, "this.v"), "2"),
        ]);
        let s2 = state(&[
            (key("t", "m:x", 0, "this.v"), "9"),
            (key("t", "m:x", 0, "result.value"), "true"),
        ]);
        let forward = get_diff(&s1, &s2);
        let backward = get_diff(&s2, &s1);
        let fkeys: Vec<&ObsKey> = forward.entries.iter().map(|e| &e.key).collect();
        let bkeys: Vec<&ObsKey> = backward.entries.iter().map(|e| &e.key).collect();
        assert_eq!(fkeys, bkeys);
        assert_eq!(forward.asymmetric_keys, backward.asymmetric_keys);
    }

    #[test]
    fn fold_drops_unstable_values_and_presence() {
        let stable = key("t", "m:x", 0, "this.v");
        let unstable = key("t", "m:x", 0, "result.value");
        let sometimes = key("t", "s:f@1-2", 0, "value");
        let run1: BTreeMap<ObsKey, String> = [
            (stable.clone(), "1".to_string()),
            (unstable.clone(), "111".to_string()),
            (sometimes.clone(), "x".to_string()),
        ]
        .into();
        let run2: BTreeMap<ObsKey, String> = [
            (stable.clone(), "1".to_string()),
            (unstable.clone(), "222".to_string()),
        ]
        .into();
        let folded = fold_runs(vec![run1, run2]);
        assert_eq!(folded.runs, 2);
        assert_eq!(folded.entries.len(), 1);
        assert_eq!(folded.entries.get(&stable).map(String::as_str), Some("1"));
    }

    #[test]
    fn single_run_fold_is_identity() {
        let run: BTreeMap<ObsKey, String> =
            [(key("t", "m:x", 0, "this.v"), "7".to_string())].into();
        let folded = fold_runs(vec![run.clone()]);
        assert_eq!(folded.entries, run);
    }

    #[test]
    fn invocation_matching_pairs_by_index() {
        let rec = |inv: u64| ObsLogRecord {
            run_index: 0,
            test_id: "t".into(),
            point_id: "m:x".into(),
            invocation_index: inv,
            path: "this.v".into(),
            value: "1".into(),
            value_kind: "int".into(),
        };
        let original = vec![rec(0), rec(1), rec(2)];
        let transformed = vec![rec(0), rec(1)];
        let aligned = match_invocations(&original, &transformed);
        assert_eq!(aligned.pairs.len(), 2);
        assert_eq!(aligned.unmatched, 1);
    }
}
