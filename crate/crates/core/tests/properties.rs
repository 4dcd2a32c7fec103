//! Property tests for the structural invariants that must hold on any
//! input, not just the fixtures: label arithmetic on arbitrary traces,
//! partition laws for splits and folds, weighted-average bounds, rank
//! sums and serialization round trips.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;

use remtime::bucketing::{fit_bucketer, BucketerOptions, BucketingKind};
use remtime::evaluate::grid::fold_assignment;
use remtime::evaluate::ranking::{rank_average, rank_lowest};
use remtime::evaluate::{mae, temporal_split, weighted_summary, EarlinessRow};
use remtime::eventlog::{
    extract_prefix_log, parse_event_log, write_csv, AttributeSchema, ColumnMapping, Event,
    EventLog, LabeledPrefix, Trace,
};
use remtime::synth::{generate_log, SynthConfig, SynthPattern};

fn build_trace(case: usize, len: usize, seed: u64) -> Trace {
    let mut t = (seed % 1_000_000) as i64;
    let events = (0..len)
        .map(|i| {
            t += (seed.rotate_left(i as u32) % 5_000) as i64;
            Event {
                activity: format!("A{}", (seed >> (i % 16)) % 7),
                timestamp: t,
                attrs: BTreeMap::new(),
            }
        })
        .collect();
    Trace {
        case_id: format!("c{case:04}"),
        case_attrs: BTreeMap::new(),
        events,
    }
}

fn arb_trace(case: usize) -> impl Strategy<Value = Trace> {
    (2usize..30, any::<u64>()).prop_map(move |(len, seed)| build_trace(case, len, seed))
}

fn arb_log(max_cases: usize) -> impl Strategy<Value = EventLog> {
    prop::collection::vec((2usize..30, any::<u64>()), 1..max_cases).prop_map(|specs| EventLog {
        traces: specs
            .into_iter()
            .enumerate()
            .map(|(i, (len, seed))| build_trace(i, len, seed))
            .collect(),
        schema: AttributeSchema::empty(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// For every prefix of every case: elapsed plus remaining equals the
    /// case duration, both parts are nonnegative, and deeper prefixes
    /// never decrease elapsed time.
    #[test]
    fn prefix_labels_partition_the_case_duration(trace in arb_trace(0)) {
        let duration = (trace.events.last().unwrap().timestamp
            - trace.events[0].timestamp) as f64;
        let trace = Arc::new(trace);
        let mut previous_elapsed = 0.0;
        for k in 1..=trace.events.len() {
            let view = LabeledPrefix::new(Arc::clone(&trace), k);
            prop_assert!(view.remaining_seconds() >= 0.0);
            prop_assert!(view.elapsed_seconds() >= 0.0);
            prop_assert_eq!(view.elapsed_seconds() + view.remaining_seconds(), duration);
            prop_assert!(view.elapsed_seconds() >= previous_elapsed);
            previous_elapsed = view.elapsed_seconds();
        }
    }

    /// Extraction emits exactly min(len - 1, cap) views per case, never a
    /// completed view, regardless of cap.
    #[test]
    fn extraction_respects_the_cap(log in arb_log(12), cap in 1usize..25) {
        let prefixes = extract_prefix_log(&log, cap);
        let expected: usize = log
            .traces
            .iter()
            .map(|t| t.events.len().saturating_sub(1).min(cap))
            .sum();
        prop_assert_eq!(prefixes.len(), expected);
        for p in &prefixes {
            prop_assert!(p.k() <= cap);
        }
    }

    /// The split partitions the cases exactly, for any ratio.
    #[test]
    fn split_is_a_partition(log in arb_log(20), ratio in 0.05f64..0.95) {
        let mut warnings = Vec::new();
        let spec = temporal_split(&log, ratio, &mut warnings).unwrap();
        let train: BTreeSet<&str> = spec.train_case_ids.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = spec.test_case_ids.iter().map(String::as_str).collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), log.traces.len());
        prop_assert_eq!(train.len(), (ratio * log.traces.len() as f64).ceil() as usize);
    }

    /// Cross-validation folds cover every case exactly once and are
    /// balanced to within one case.
    #[test]
    fn folds_partition_and_balance(n in 2usize..120, folds in 2usize..8, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("case{i}")).collect();
        let assignment = fold_assignment(&ids, folds, seed);
        prop_assert_eq!(assignment.len(), folds);
        let mut seen = BTreeSet::new();
        for fold in &assignment {
            for id in fold {
                prop_assert!(seen.insert(id.clone()), "case {} assigned twice", id);
            }
        }
        prop_assert_eq!(seen.len(), n);
        let sizes: Vec<usize> = assignment.iter().map(Vec::len).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        prop_assert!(spread <= 1, "fold sizes {:?}", sizes);
    }

    /// The weighted MAE is a convex combination of the per-length MAEs,
    /// so it stays inside their range, and the spread statistics stay
    /// nonnegative.
    #[test]
    fn weighted_mae_stays_in_range(
        rows in prop::collection::vec((1usize..200, 0.0f64..1e6), 1..20)
    ) {
        let curve: Vec<EarlinessRow> = rows
            .iter()
            .enumerate()
            .map(|(i, (n, m))| EarlinessRow { k: i + 1, n_prefixes: *n, mae_seconds: *m })
            .collect();
        let summary = weighted_summary(&curve, 1e6).unwrap();
        let lo = curve.iter().map(|r| r.mae_seconds).fold(f64::INFINITY, f64::min);
        let hi = curve.iter().map(|r| r.mae_seconds).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(summary.weighted_mae >= lo - 1e-9 && summary.weighted_mae <= hi + 1e-9);
        prop_assert!(summary.weighted_std >= 0.0);
        prop_assert!(summary.normalized_mae >= 0.0);
    }

    /// MAE is symmetric, nonnegative and absolutely homogeneous.
    #[test]
    fn mae_is_a_metric_on_paired_vectors(
        pairs in prop::collection::vec((0.0f64..1e6, 0.0f64..1e6), 1..200)
    ) {
        let (ps, actuals): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let forward = mae(&ps, &actuals).unwrap();
        let backward = mae(&actuals, &ps).unwrap();
        prop_assert!(forward >= 0.0);
        prop_assert_eq!(forward, backward);
        let doubled: Vec<f64> = ps.iter().map(|v| v * 2.0).collect();
        let doubled_actuals: Vec<f64> = actuals.iter().map(|v| v * 2.0).collect();
        let scaled = mae(&doubled, &doubled_actuals).unwrap();
        prop_assert!((scaled - 2.0 * forward).abs() <= 1e-9 * scaled.max(1.0));
    }

    /// Average-tie ranks of an M-vector always sum to M(M+1)/2; lowest
    /// ranks stay within 1..=M and rank the minimum first.
    #[test]
    fn rank_sums_are_conserved(values in prop::collection::vec(0.0f64..100.0, 1..12)) {
        let m = values.len();
        let average = rank_average(&values);
        let total: f64 = average.iter().sum();
        prop_assert!((total - (m * (m + 1)) as f64 / 2.0).abs() <= 1e-9);
        let lowest = rank_lowest(&values);
        prop_assert!(lowest.iter().all(|&r| (1..=m).contains(&r)));
        let min_pos = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        prop_assert_eq!(lowest[min_pos], 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every bucketing strategy sends each training prefix to a bucket it
    /// actually announces.
    #[test]
    fn bucketers_are_total_on_their_training_set(
        n_cases in 6usize..40,
        seed in any::<u64>(),
        kind_pick in 0usize..4,
    ) {
        let kind = [
            BucketingKind::Single,
            BucketingKind::PrefixLength,
            BucketingKind::Cluster,
            BucketingKind::State,
        ][kind_pick];
        let config = SynthConfig {
            n_cases,
            patterns: vec![
                SynthPattern::new(&["A", "B", "C", "D"], 2.0),
                SynthPattern::new(&["A", "C", "E"], 1.0),
            ],
            gap_noise: 0.5,
            seed,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).unwrap();
        let prefixes = extract_prefix_log(&log, 20);
        let mut warnings = Vec::new();
        let bucketer = fit_bucketer(
            &prefixes,
            kind,
            &BucketerOptions::default(),
            seed,
            &mut warnings,
        )
        .unwrap();
        let mut known: BTreeSet<u32> = bucketer.bucket_ids().into_iter().collect();
        if let Some(fallback) = bucketer.fallback_id() {
            known.insert(fallback);
        }
        prop_assert!(!known.is_empty());
        for p in &prefixes {
            prop_assert!(known.contains(&bucketer.assign(p)));
        }
    }

    /// Writing a log to CSV and parsing it back preserves cases, order,
    /// activities and timestamps.
    #[test]
    fn csv_round_trip_preserves_the_log(n_cases in 1usize..25, seed in any::<u64>()) {
        let config = SynthConfig {
            n_cases,
            patterns: vec![
                SynthPattern::new(&["start", "work", "done"], 1.0),
                SynthPattern::new(&["start", "done"], 1.0),
            ],
            gap_noise: 0.9,
            seed,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).unwrap();
        let mapping = ColumnMapping::new("case_id", "activity", "timestamp", "%Y-%m-%d %H:%M:%S");
        let mut buffer = Vec::new();
        write_csv(&log, &mut buffer, &mapping).unwrap();
        let parsed = parse_event_log(buffer.as_slice(), &mapping, &AttributeSchema::empty())
            .unwrap()
            .log;
        prop_assert_eq!(parsed.traces.len(), log.traces.len());
        for (a, b) in parsed.traces.iter().zip(&log.traces) {
            prop_assert_eq!(&a.case_id, &b.case_id);
            prop_assert_eq!(a.events.len(), b.events.len());
            for (x, y) in a.events.iter().zip(&b.events) {
                prop_assert_eq!(&x.activity, &y.activity);
                prop_assert_eq!(x.timestamp, y.timestamp);
            }
        }
    }
}
