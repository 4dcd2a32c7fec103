//! Hyperparameter grids and seeded k-fold cross-validated grid search.
//!
//! Folds partition cases, never prefixes, so all prefixes of a case land
//! on the same side of every train/validation split.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mae, EvaluateError};
use crate::bucketing::{Abstraction, BucketingKind};
use crate::eventlog::{AttributeSchema, LabeledPrefix};
use crate::predict::gbt::GbtParams;
use crate::predict::{fit_method, MethodDescriptor, MethodParams, PredictorKind};

/// The stock search space for a method. Boosted methods get the full
/// hyperparameter cross product (48 points, times k in {2, 5, 10} under
/// cluster bucketing); transition systems vary the abstraction; the
/// baseline has nothing to tune.
pub fn default_grid(descriptor: &MethodDescriptor) -> Vec<MethodParams> {
    let base = &descriptor.params;
    match descriptor.predictor {
        PredictorKind::MeanBaseline => vec![base.clone()],
        PredictorKind::TransitionSystem => {
            [Abstraction::Set, Abstraction::Bag, Abstraction::Sequence]
                .into_iter()
                .map(|abstraction| MethodParams {
                    abstraction,
                    ..base.clone()
                })
                .collect()
        }
        PredictorKind::Gbt => {
            let cluster_ks: Vec<usize> = if descriptor.bucketing == Some(BucketingKind::Cluster) {
                vec![2, 5, 10]
            } else {
                vec![base.cluster_k]
            };
            let mut points = Vec::new();
            for &cluster_k in &cluster_ks {
                for n_estimators in [250, 500] {
                    for learning_rate in [0.02, 0.04, 0.06] {
                        for subsample in [0.5, 0.8] {
                            for colsample in [0.5, 0.8] {
                                for max_depth in [3, 6] {
                                    points.push(MethodParams {
                                        cluster_k,
                                        gbt: GbtParams {
                                            n_estimators,
                                            learning_rate,
                                            subsample,
                                            colsample,
                                            max_depth,
                                            min_leaf: base.gbt.min_leaf,
                                        },
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
            points
        }
    }
}

/// Deterministic case-level fold assignment: sorted distinct case ids,
/// seeded shuffle, round-robin.
pub fn fold_assignment(case_ids: &[String], folds: usize, seed: u64) -> Vec<Vec<String>> {
    let mut shuffled: Vec<&String> = case_ids.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, id) in shuffled.into_iter().enumerate() {
        out[i % folds].push(id.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best_params: MethodParams,
    /// Mean validation MAE of the winning point, seconds; NaN when the
    /// search timed out before finishing a single point.
    pub best_mae: f64,
    /// Grid points fully evaluated before any deadline hit.
    pub evaluated: usize,
    pub timed_out: bool,
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Picks the grid point with the lowest mean validation MAE across
/// case-level folds. Ties keep the earliest point in grid order. The
/// deadline is checked between grid points and between folds; on expiry
/// the best fully evaluated point so far is returned with `timed_out`
/// set.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    train_prefixes: &[LabeledPrefix],
    attr_schema: &AttributeSchema,
    descriptor: &MethodDescriptor,
    grid: &[MethodParams],
    folds: usize,
    seed: u64,
    deadline: Option<Instant>,
    warnings: &mut Vec<String>,
) -> Result<GridSearchOutcome, EvaluateError> {
    if grid.is_empty() {
        return Err(EvaluateError::EmptyGrid);
    }
    if folds < 2 {
        return Err(EvaluateError::BadFolds(folds));
    }
    if train_prefixes.is_empty() {
        return Err(EvaluateError::Predict(
            crate::predict::PredictError::EmptyTrainingSet,
        ));
    }

    let case_ids: Vec<String> = train_prefixes
        .iter()
        .map(|p| p.case_id().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let fold_cases = fold_assignment(&case_ids, folds, seed);
    let fold_sets: Vec<BTreeSet<&str>> = fold_cases
        .iter()
        .map(|ids| ids.iter().map(|s| s.as_str()).collect())
        .collect();

    let mut skip_notes: BTreeSet<String> = BTreeSet::new();
    let mut best: Option<(usize, f64)> = None;
    let mut evaluated = 0;
    let mut timed_out = false;

    'points: for (gi, params) in grid.iter().enumerate() {
        if past(deadline) {
            timed_out = true;
            break;
        }
        let candidate = MethodDescriptor {
            params: params.clone(),
            ..descriptor.clone()
        };
        let mut fold_maes = Vec::new();
        for (f, val_set) in fold_sets.iter().enumerate() {
            if past(deadline) {
                timed_out = true;
                break 'points;
            }
            let fit_prefixes: Vec<LabeledPrefix> = train_prefixes
                .iter()
                .filter(|p| !val_set.contains(p.case_id()))
                .cloned()
                .collect();
            let val_prefixes: Vec<&LabeledPrefix> = train_prefixes
                .iter()
                .filter(|p| val_set.contains(p.case_id()))
                .collect();
            if val_prefixes.is_empty() || fit_prefixes.is_empty() {
                skip_notes.insert(format!(
                    "fold {f} skipped: {} training and {} validation prefixes",
                    fit_prefixes.len(),
                    val_prefixes.len()
                ));
                continue;
            }
            let bundle = fit_method(&fit_prefixes, attr_schema, &candidate, &mut Vec::new())?;
            let mut predictions = Vec::with_capacity(val_prefixes.len());
            let mut actuals = Vec::with_capacity(val_prefixes.len());
            for p in &val_prefixes {
                predictions.push(bundle.predict(p)?);
                actuals.push(p.remaining_seconds());
            }
            fold_maes.push(mae(&predictions, &actuals)?);
        }
        evaluated += 1;
        let score = if fold_maes.is_empty() {
            skip_notes.insert(format!("grid point {gi} had no usable folds"));
            f64::INFINITY
        } else {
            fold_maes.iter().sum::<f64>() / fold_maes.len() as f64
        };
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((gi, score));
        }
    }

    warnings.extend(skip_notes);
    let (best_index, best_mae) = best.unwrap_or((0, f64::NAN));
    Ok(GridSearchOutcome {
        best_params: grid[best_index].clone(),
        best_mae,
        evaluated,
        timed_out,
    })
}
