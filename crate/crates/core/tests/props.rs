//! Property tests over the pure analysis kernels: the N-run constancy
//! fold, the state diff, and the stub table.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use stubscope_core::adapter::ReturnCategory;
use stubscope_core::observe::{fold_runs, get_diff, InvariantState, ObsKey};
use stubscope_core::transform::stub_values;

fn key_strategy() -> impl Strategy<Value = ObsKey> {
    (
        prop::sample::select(vec!["t1", "t2"]),
        prop::sample::select(vec!["m:a", "s:f@1-2"]),
        0u64..3,
        prop::sample::select(vec![
            "this.v",
            "result.value",
            "arg0.value",
            "value",
            "size",
        ]),
    )
        .prop_map(|(test, point, invocation, path)| ObsKey {
            test: test.to_string(),
            point: point.to_string(),
            invocation,
            path: path.to_string(),
        })
}

fn state_strategy() -> impl Strategy<Value = InvariantState> {
    prop::collection::btree_map(key_strategy(), "[0-9]", 0..20)
        .prop_map(|entries| InvariantState { runs: 1, entries })
}

/// Reference diff: brute-force pairwise comparison over the key union.
fn oracle_diff(a: &InvariantState, b: &InvariantState) -> Vec<(ObsKey, String, String)> {
    let keys: BTreeSet<&ObsKey> = a.entries.keys().chain(b.entries.keys()).collect();
    let mut out = Vec::new();
    for key in keys {
        if let (Some(va), Some(vb)) = (a.entries.get(key), b.entries.get(key)) {
            if va != vb {
                out.push((key.clone(), va.clone(), vb.clone()));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn diff_with_self_is_empty(state in state_strategy()) {
        let diff = get_diff(&state, &state);
        prop_assert!(diff.entries.is_empty());
        prop_assert_eq!(diff.asymmetric_keys, 0);
    }

    #[test]
    fn diff_matches_brute_force_oracle(a in state_strategy(), b in state_strategy()) {
        let diff = get_diff(&a, &b);
        let oracle = oracle_diff(&a, &b);
        let got: Vec<(ObsKey, String, String)> = diff
            .entries
            .iter()
            .map(|e| (e.key.clone(), e.original.clone(), e.transformed.clone()))
            .collect();
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn diff_key_sets_are_symmetric(a in state_strategy(), b in state_strategy()) {
        let forward: Vec<ObsKey> = get_diff(&a, &b).entries.into_iter().map(|e| e.key).collect();
        let backward: Vec<ObsKey> = get_diff(&b, &a).entries.into_iter().map(|e| e.key).collect();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn fold_keeps_exactly_the_constant_intersection(
        runs in prop::collection::vec(
            prop::collection::btree_map(key_strategy(), "[0-9]", 0..12),
            1..4,
        )
    ) {
        let folded = fold_runs(runs.clone());
        for (key, value) in &folded.entries {
            for run in &runs {
                prop_assert_eq!(run.get(key), Some(value), "kept key must be constant everywhere");
            }
        }
        // And nothing constant was dropped.
        let first = &runs[0];
        for (key, value) in first {
            let constant = runs.iter().all(|r| r.get(key) == Some(value));
            prop_assert_eq!(folded.entries.contains_key(key), constant);
        }
    }

    #[test]
    fn folded_values_always_come_from_every_run(
        shared in prop::collection::btree_map(key_strategy(), "[0-9]", 1..8),
        extra in prop::collection::btree_map(key_strategy(), "[0-9]", 0..6),
    ) {
        // Two runs sharing `shared` but one with extra keys: the extras
        // must never survive the fold.
        let run1: BTreeMap<ObsKey, String> = shared.clone();
        let mut run2 = shared.clone();
        for (k, v) in extra.iter() {
            run2.entry(k.clone()).or_insert_with(|| v.clone());
        }
        let folded = fold_runs(vec![run1.clone(), run2]);
        for key in folded.entries.keys() {
            prop_assert!(run1.contains_key(key));
        }
    }
}

#[test]
fn variant_count_law_holds_for_every_category() {
    let categories = [
        (ReturnCategory::Void, 1),
        (ReturnCategory::Reference, 1),
        (ReturnCategory::ArrayLike, 1),
        (ReturnCategory::Boolean, 2),
        (ReturnCategory::IntegerLike, 2),
        (ReturnCategory::FloatLike, 2),
        (ReturnCategory::Character, 2),
        (ReturnCategory::StringLike, 2),
    ];
    for (category, expected) in categories {
        assert_eq!(stub_values(category).len(), expected, "{category:?}");
    }
    assert!(stub_values(ReturnCategory::Unknown).is_empty());
}
