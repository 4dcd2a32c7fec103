//! Gradient boosted regression with squared loss.
//!
//! Plain stagewise boosting: start from the target mean, then repeatedly
//! fit a tree to the current residuals on a seeded row and column sample
//! and add it scaled by the learning rate. Every stage updates residuals
//! on all rows. The fit is a pure function of (rows, targets, params,
//! seed).

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, RegressionTree};
use super::PredictError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn (without replacement) per stage.
    pub subsample: f64,
    /// Fraction of feature columns drawn per stage.
    pub colsample: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_estimators: 250,
            learning_rate: 0.04,
            subsample: 0.8,
            colsample: 0.8,
            max_depth: 6,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub seed: u64,
    pub n_features: usize,
    /// Initial prediction: the training target mean.
    pub base: f64,
    pub trees: Vec<RegressionTree>,
}

pub fn fit_gbt(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: &GbtParams,
    seed: u64,
) -> Result<GbtModel, PredictError> {
    if rows.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    if rows.len() != targets.len() {
        return Err(PredictError::LengthMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    let n = rows.len();
    let d = rows[0].len();
    let base = targets.iter().sum::<f64>() / n as f64;
    let mut preds = vec![base; n];
    let mut residuals: Vec<f64> = targets.iter().zip(&preds).map(|(y, p)| y - p).collect();

    let n_rows = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
    let n_cols = ((params.colsample * d as f64).floor() as usize).clamp(1, d.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.n_estimators);

    for _ in 0..params.n_estimators {
        let mut row_idx = sample(&mut rng, n, n_rows).into_vec();
        row_idx.sort_unstable();
        let mut col_idx = if d == 0 {
            Vec::new()
        } else {
            sample(&mut rng, d, n_cols).into_vec()
        };
        col_idx.sort_unstable();

        let tree = fit_tree_on(
            rows,
            &residuals,
            &row_idx,
            &col_idx,
            params.max_depth,
            params.min_leaf,
        );
        for i in 0..n {
            preds[i] += params.learning_rate * tree.predict(&rows[i]);
            residuals[i] = targets[i] - preds[i];
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        params: params.clone(),
        seed,
        n_features: d,
        base,
        trees,
    })
}

impl GbtModel {
    /// Remaining-time estimate for one encoded row, clamped to be
    /// non-negative. Errors when the row width does not match the model.
    pub fn predict(&self, row: &[f64]) -> Result<f64, PredictError> {
        Ok(self.raw_predict(row)?.max(0.0))
    }

    /// Unclamped model output.
    pub fn raw_predict(&self, row: &[f64]) -> Result<f64, PredictError> {
        self.check_width(row)?;
        Ok(self.partial_prediction(row, self.trees.len()))
    }

    /// Unclamped output of the first `stages` trees; 0 stages gives the
    /// base prediction. Useful for inspecting the fit trajectory.
    pub fn partial_prediction(&self, row: &[f64], stages: usize) -> f64 {
        let mut out = self.base;
        for tree in self.trees.iter().take(stages) {
            out += self.params.learning_rate * tree.predict(row);
        }
        out
    }

    fn check_width(&self, row: &[f64]) -> Result<(), PredictError> {
        if row.len() != self.n_features {
            return Err(PredictError::WidthMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(())
    }
}
