//! Evaluation protocol: temporal train/test split, MAE, earliness
//! curves, weighted summaries, cross-validated grid search and method
//! ranking.

pub mod grid;
pub mod ranking;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{EventLog, LabeledPrefix};
use crate::predict::{MethodDescriptor, ModelBundle, PredictError};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("train ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
    #[error("cannot split an empty log")]
    EmptyLog,
    #[error("mae needs at least one prediction")]
    EmptyInput,
    #[error("predictions ({predictions}) and actuals ({actuals}) differ in length")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("weighted summary needs a nonempty earliness curve")]
    EmptyCurve,
    #[error("grid search needs at least one grid point")]
    EmptyGrid,
    #[error("cross-validation needs at least 2 folds, got {0}")]
    BadFolds(usize),
    #[error("the Friedman test needs at least 3 methods, got {0}")]
    TooFewMethods(usize),
    #[error("the Friedman test needs a complete rank matrix")]
    IncompleteMatrix,
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// A train/test partition of cases by start time. Oldest cases train;
/// cases may still be running across the split instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub train_case_ids: Vec<String>,
    pub test_case_ids: Vec<String>,
    /// Start of the earliest test case, epoch seconds; the latest train
    /// case start when the test side is empty.
    pub split_instant: i64,
}

/// Orders cases by (start time, case id) and sends the first
/// ceil(ratio * n) to the training side.
pub fn temporal_split(
    log: &EventLog,
    train_ratio: f64,
    warnings: &mut Vec<String>,
) -> Result<SplitSpec, EvaluateError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(EvaluateError::BadRatio(train_ratio));
    }
    if log.traces.is_empty() {
        return Err(EvaluateError::EmptyLog);
    }
    let mut order: Vec<&crate::eventlog::Trace> = log.traces.iter().collect();
    order.sort_by(|a, b| {
        a.start()
            .cmp(&b.start())
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    let n = order.len();
    let n_train = ((train_ratio * n as f64).ceil() as usize).min(n);
    let train: Vec<String> = order[..n_train].iter().map(|t| t.case_id.clone()).collect();
    let test: Vec<String> = order[n_train..].iter().map(|t| t.case_id.clone()).collect();
    let split_instant = match order.get(n_train) {
        Some(first_test) => first_test.start(),
        None => order[n_train - 1].start(),
    };
    if test.is_empty() {
        warnings.push(format!(
            "temporal split left no test cases ({n} cases at ratio {train_ratio})"
        ));
    }
    Ok(SplitSpec {
        train_ratio,
        train_case_ids: train,
        test_case_ids: test,
        split_instant,
    })
}

/// Materializes the two sides of a split as standalone logs.
pub fn split_log(log: &EventLog, spec: &SplitSpec) -> (EventLog, EventLog) {
    let train_ids: BTreeSet<&str> = spec.train_case_ids.iter().map(|s| s.as_str()).collect();
    let take = |keep: bool| EventLog {
        traces: log
            .traces
            .iter()
            .filter(|t| train_ids.contains(t.case_id.as_str()) == keep)
            .cloned()
            .collect(),
        schema: log.schema.clone(),
    };
    (take(true), take(false))
}

/// Mean absolute error in seconds.
pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64, EvaluateError> {
    if predictions.len() != actuals.len() {
        return Err(EvaluateError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvaluateError::EmptyInput);
    }
    let total: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlinessRow {
    pub k: usize,
    pub n_prefixes: usize,
    pub mae_seconds: f64,
}

/// Accuracy after each arrived event: MAE over test prefixes of exactly
/// length k, for every k up to `max_prefix` with at least one prefix.
/// Cases shorter than k simply drop out of row k.
pub fn earliness_curve(
    bundle: &ModelBundle,
    test_prefixes: &[LabeledPrefix],
    max_prefix: usize,
) -> Result<Vec<EarlinessRow>, EvaluateError> {
    let mut rows = Vec::new();
    for k in 1..=max_prefix {
        let mut predictions = Vec::new();
        let mut actuals = Vec::new();
        for p in test_prefixes.iter().filter(|p| p.k() == k) {
            predictions.push(bundle.predict(p)?);
            actuals.push(p.remaining_seconds());
        }
        if !predictions.is_empty() {
            rows.push(EarlinessRow {
                k,
                n_prefixes: predictions.len(),
                mae_seconds: mae(&predictions, &actuals)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSummary {
    /// Per-length MAEs averaged with weights proportional to prefix
    /// counts, seconds.
    pub weighted_mae: f64,
    /// Weighted population standard deviation of the per-length MAEs.
    pub weighted_std: f64,
    /// Weighted MAE divided by the mean case duration of the full log.
    pub normalized_mae: f64,
}

pub fn weighted_summary(
    curve: &[EarlinessRow],
    mean_case_duration_secs: f64,
) -> Result<WeightedSummary, EvaluateError> {
    if curve.is_empty() {
        return Err(EvaluateError::EmptyCurve);
    }
    let total: f64 = curve.iter().map(|r| r.n_prefixes as f64).sum();
    let weighted_mae = curve
        .iter()
        .map(|r| r.n_prefixes as f64 * r.mae_seconds)
        .sum::<f64>()
        / total;
    let variance = curve
        .iter()
        .map(|r| r.n_prefixes as f64 * (r.mae_seconds - weighted_mae).powi(2))
        .sum::<f64>()
        / total;
    let normalized_mae = if mean_case_duration_secs > 0.0 {
        weighted_mae / mean_case_duration_secs
    } else {
        0.0
    };
    Ok(WeightedSummary {
        weighted_mae,
        weighted_std: variance.sqrt(),
        normalized_mae,
    })
}

/// Full test-set evaluation of one trained method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: MethodDescriptor,
    pub rows: Vec<EarlinessRow>,
    pub summary: WeightedSummary,
    pub train_secs: f64,
    pub predict_secs: f64,
}

pub fn evaluate_bundle(
    bundle: &ModelBundle,
    test_prefixes: &[LabeledPrefix],
    max_prefix: usize,
    mean_case_duration_secs: f64,
) -> Result<EvaluationReport, EvaluateError> {
    let rows = earliness_curve(bundle, test_prefixes, max_prefix)?;
    let summary = weighted_summary(&rows, mean_case_duration_secs)?;
    Ok(EvaluationReport {
        method: bundle.descriptor.clone(),
        rows,
        summary,
        train_secs: 0.0,
        predict_secs: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::extract_prefix_log;
    use crate::predict::{fit_method, transition::Statistic, MethodParams};
    use crate::synth::{generate_log, SynthConfig, SynthPattern};

    fn staggered_log(n_cases: usize, seed: u64) -> EventLog {
        let config = SynthConfig {
            n_cases,
            patterns: vec![SynthPattern::new(&["A", "B", "C", "D"], 1.0)],
            gap_secs: 100.0,
            gap_noise: 0.0,
            case_interval_secs: 86_400.0,
            seed,
            ..SynthConfig::default()
        };
        generate_log(&config).unwrap()
    }

    #[test]
    fn eighty_twenty_split_takes_the_oldest_cases() {
        let log = staggered_log(10, 0);
        let mut warnings = vec![];
        let spec = temporal_split(&log, 0.8, &mut warnings).unwrap();
        assert_eq!(spec.train_case_ids.len(), 8);
        assert_eq!(spec.test_case_ids.len(), 2);
        assert!(warnings.is_empty());
        let (train, test) = split_log(&log, &spec);
        let max_train = train.traces.iter().map(|t| t.start()).max().unwrap();
        let min_test = test.traces.iter().map(|t| t.start()).min().unwrap();
        assert!(max_train <= min_test);
        assert_eq!(spec.split_instant, min_test);
    }

    #[test]
    fn single_case_goes_to_train_with_warning() {
        let log = staggered_log(1, 1);
        let mut warnings = vec![];
        let spec = temporal_split(&log, 0.8, &mut warnings).unwrap();
        assert_eq!(spec.train_case_ids.len(), 1);
        assert!(spec.test_case_ids.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn identical_starts_assign_by_case_id() {
        let config = SynthConfig {
            n_cases: 4,
            patterns: vec![SynthPattern::new(&["A", "B"], 1.0)],
            case_interval_secs: 0.0,
            seed: 0,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).unwrap();
        let spec = temporal_split(&log, 0.5, &mut vec![]).unwrap();
        assert_eq!(spec.train_case_ids, vec!["case_1", "case_2"]);
        assert_eq!(spec.test_case_ids, vec!["case_3", "case_4"]);
    }

    #[test]
    fn split_covers_cases_disjointly_across_random_logs() {
        for seed in 0..20 {
            let config = SynthConfig {
                n_cases: 7 + (seed as usize % 13),
                patterns: vec![
                    SynthPattern::new(&["A", "B", "C"], 1.0),
                    SynthPattern::new(&["A", "C"], 1.0),
                ],
                gap_noise: 0.5,
                seed,
                ..SynthConfig::default()
            };
            let log = generate_log(&config).unwrap();
            let spec = temporal_split(&log, 0.8, &mut vec![]).unwrap();
            let train: BTreeSet<_> = spec.train_case_ids.iter().collect();
            let test: BTreeSet<_> = spec.test_case_ids.iter().collect();
            assert!(train.is_disjoint(&test));
            assert_eq!(train.len() + test.len(), log.n_cases());
            let (a, b) = split_log(&log, &spec);
            let max_train = a.traces.iter().map(|t| t.start()).max().unwrap();
            if let Some(min_test) = b.traces.iter().map(|t| t.start()).min() {
                assert!(max_train <= min_test);
            }
        }
    }

    #[test]
    fn out_of_range_ratio_is_rejected() {
        let log = staggered_log(3, 0);
        assert!(matches!(
            temporal_split(&log, 0.0, &mut vec![]),
            Err(EvaluateError::BadRatio(_))
        ));
        assert!(matches!(
            temporal_split(&log, 1.0, &mut vec![]),
            Err(EvaluateError::BadRatio(_))
        ));
    }

    #[test]
    fn mae_matches_hand_arithmetic() {
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 1.5);
        assert_eq!(mae(&[4.0, 4.0], &[4.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mae(&[7.0], &[3.0]).unwrap(), 4.0);
        assert!(matches!(mae(&[], &[]), Err(EvaluateError::EmptyInput)));
        assert!(matches!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(EvaluateError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn curve_filters_short_cases() {
        let config = SynthConfig {
            n_cases: 1,
            patterns: vec![SynthPattern::new(&["A", "B", "C"], 1.0)],
            seed: 0,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).unwrap();
        let prefixes = extract_prefix_log(&log, 20);
        let bundle = fit_method(
            &prefixes,
            &log.schema,
            &crate::predict::MethodDescriptor::mean_baseline(0),
            &mut vec![],
        )
        .unwrap();
        let rows = earliness_curve(&bundle, &prefixes, 20).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].k, rows[0].n_prefixes), (1, 1));
        assert_eq!((rows[1].k, rows[1].n_prefixes), (2, 1));
    }

    #[test]
    fn deterministic_log_gives_zero_curve_for_sequence_ts() {
        let log = staggered_log(20, 3);
        let spec = temporal_split(&log, 0.8, &mut vec![]).unwrap();
        let (train, test) = split_log(&log, &spec);
        let train_prefixes = extract_prefix_log(&train, 20);
        let test_prefixes = extract_prefix_log(&test, 20);
        let params = MethodParams {
            abstraction: crate::bucketing::Abstraction::Sequence,
            statistic: Statistic::Mean,
            ..MethodParams::default()
        };
        let bundle = fit_method(
            &train_prefixes,
            &log.schema,
            &crate::predict::MethodDescriptor::transition_system(params, 0),
            &mut vec![],
        )
        .unwrap();
        let rows = earliness_curve(&bundle, &test_prefixes, 20).unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            assert_eq!(row.mae_seconds, 0.0);
        }
    }

    #[test]
    fn weighted_summary_matches_hand_arithmetic() {
        let single = [EarlinessRow {
            k: 1,
            n_prefixes: 4,
            mae_seconds: 2.5,
        }];
        let s = weighted_summary(&single, 10.0).unwrap();
        assert_eq!(s.weighted_mae, 2.5);
        assert_eq!(s.weighted_std, 0.0);
        assert_eq!(s.normalized_mae, 0.25);

        let curve = [
            EarlinessRow {
                k: 1,
                n_prefixes: 3,
                mae_seconds: 2.0,
            },
            EarlinessRow {
                k: 2,
                n_prefixes: 1,
                mae_seconds: 6.0,
            },
        ];
        let s = weighted_summary(&curve, 6.0).unwrap();
        assert_eq!(s.weighted_mae, 3.0);
        assert_eq!(s.normalized_mae, 0.5);
        let variance: f64 = (3.0 * 1.0 + 1.0 * 9.0) / 4.0;
        assert!((s.weighted_std - variance.sqrt()).abs() < 1e-12);
        assert!(s.weighted_mae >= 2.0 && s.weighted_mae <= 6.0);

        assert!(matches!(
            weighted_summary(&[], 1.0),
            Err(EvaluateError::EmptyCurve)
        ));
    }
}
