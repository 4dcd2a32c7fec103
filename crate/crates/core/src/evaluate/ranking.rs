//! Cross-dataset method ranking and the Friedman test.
//!
//! Two tie policies coexist deliberately: tables report ties at the
//! lowest rank of the tied block, while the Friedman statistic uses
//! average ranks, the standard choice for the test. Both are computed
//! from the same MAE values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvaluateError;

/// Ascending ranks, 1 = best; tied values all get the lowest rank of
/// their block.
pub fn rank_lowest(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| **w < *v).count())
        .collect()
}

/// Ascending ranks with ties averaged.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| **w < *v).count();
            let equal = values.iter().filter(|w| **w == *v).count();
            below as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
}

/// Friedman chi-squared over an N datasets x M methods matrix of
/// average-tie ranks.
pub fn friedman_test(rank_matrix: &[Vec<f64>]) -> Result<FriedmanResult, EvaluateError> {
    let Some(first) = rank_matrix.first() else {
        return Err(EvaluateError::IncompleteMatrix);
    };
    let m = first.len();
    if m < 3 {
        return Err(EvaluateError::TooFewMethods(m));
    }
    if rank_matrix.iter().any(|row| row.len() != m) {
        return Err(EvaluateError::IncompleteMatrix);
    }
    let n = rank_matrix.len() as f64;
    let mf = m as f64;
    let sum_sq_mean: f64 = (0..m)
        .map(|j| {
            let mean: f64 = rank_matrix.iter().map(|row| row[j]).sum::<f64>() / n;
            mean * mean
        })
        .sum();
    let statistic = 12.0 * n / (mf * (mf + 1.0)) * (sum_sq_mean - mf * (mf + 1.0).powi(2) / 4.0);
    Ok(FriedmanResult {
        statistic,
        df: m - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    /// Sorted method names; all rank rows follow this order.
    pub methods: Vec<String>,
    /// Datasets with a value for every method, in input order.
    pub datasets: Vec<String>,
    /// Datasets dropped for missing method cells.
    pub excluded_datasets: Vec<String>,
    /// ranks[dataset][method], lowest-tie policy, 1 = best.
    pub ranks: Vec<Vec<usize>>,
    pub mean_ranks: Vec<f64>,
    /// Present when at least 3 methods and 1 complete dataset exist.
    pub friedman: Option<FriedmanResult>,
}

/// Ranks methods per dataset by weighted MAE and aggregates mean ranks.
/// Datasets missing any method are excluded rather than partially
/// ranked.
pub fn rank_methods(
    per_dataset: &[(String, BTreeMap<String, f64>)],
) -> Result<RankTable, EvaluateError> {
    let methods: Vec<String> = per_dataset
        .iter()
        .flat_map(|(_, maes)| maes.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if methods.is_empty() {
        return Err(EvaluateError::IncompleteMatrix);
    }

    let mut datasets = Vec::new();
    let mut excluded = Vec::new();
    let mut ranks = Vec::new();
    let mut average_ranks = Vec::new();
    for (dataset, maes) in per_dataset {
        let values: Option<Vec<f64>> = methods.iter().map(|m| maes.get(m).copied()).collect();
        match values {
            Some(values) => {
                datasets.push(dataset.clone());
                ranks.push(rank_lowest(&values));
                average_ranks.push(rank_average(&values));
            }
            None => excluded.push(dataset.clone()),
        }
    }
    if datasets.is_empty() {
        return Err(EvaluateError::IncompleteMatrix);
    }

    let n = datasets.len() as f64;
    let mean_ranks: Vec<f64> = (0..methods.len())
        .map(|j| ranks.iter().map(|row| row[j] as f64).sum::<f64>() / n)
        .collect();
    let friedman = friedman_test(&average_ranks).ok();

    Ok(RankTable {
        methods,
        datasets,
        excluded_datasets: excluded,
        ranks,
        mean_ranks,
        friedman,
    })
}
