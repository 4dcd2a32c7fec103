//! Annotated transition system predictor.
//!
//! Training maps every prefix to an abstract state of its visible
//! activity sequence and stores the observed remaining times per state.
//! Prediction looks up the query state and returns the configured
//! statistic of its list; a state never seen in training falls back to
//! the statistic over all training labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bucketing::{state_key, Abstraction};
use crate::eventlog::LabeledPrefix;

use super::PredictError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
        }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Statistic::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
                let n = sorted.len();
                if n % 2 == 1 {
                    sorted[n / 2]
                } else {
                    (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub abstraction: Abstraction,
    pub horizon: Option<usize>,
    pub statistic: Statistic,
    /// Remaining seconds observed per state, in training prefix order.
    pub annotations: BTreeMap<String, Vec<f64>>,
    /// Statistic over all training labels, used for unseen states.
    pub global: f64,
}

pub fn fit_transition_system(
    prefixes: &[LabeledPrefix],
    abstraction: Abstraction,
    horizon: Option<usize>,
    statistic: Statistic,
) -> Result<TransitionSystem, PredictError> {
    if prefixes.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let mut annotations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(prefixes.len());
    for p in prefixes {
        let activities: Vec<&str> = p.activities().collect();
        let key = state_key(&activities, abstraction, horizon);
        annotations
            .entry(key)
            .or_default()
            .push(p.remaining_seconds());
        all.push(p.remaining_seconds());
    }
    Ok(TransitionSystem {
        abstraction,
        horizon,
        statistic,
        annotations,
        global: statistic.apply(&all),
    })
}

impl TransitionSystem {
    pub fn predict(&self, prefix: &LabeledPrefix) -> f64 {
        let activities: Vec<&str> = prefix.activities().collect();
        let key = state_key(&activities, self.abstraction, self.horizon);
        match self.annotations.get(&key) {
            Some(values) => self.statistic.apply(values),
            None => self.global,
        }
    }

    pub fn n_states(&self) -> usize {
        self.annotations.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::extract_prefix_log;
    use crate::synth::{generate_log, SynthConfig, SynthPattern};

    fn deterministic_prefixes() -> Vec<LabeledPrefix> {
        // two branches with different speeds, recognizable from the first
        // activity on
        let config = SynthConfig {
            n_cases: 20,
            patterns: vec![
                SynthPattern::new(&["A", "C", "E"], 1.0),
                SynthPattern::new(&["B", "D", "E"], 1.0),
            ],
            gap_secs: 100.0,
            ..SynthConfig::default()
        };
        extract_prefix_log(&generate_log(&config).unwrap(), 20)
    }

    #[test]
    fn exact_on_deterministic_log() {
        let prefixes = deterministic_prefixes();
        let ts =
            fit_transition_system(&prefixes, Abstraction::Sequence, None, Statistic::Mean).unwrap();
        for p in &prefixes {
            assert_eq!(ts.predict(p), p.remaining_seconds());
        }
    }

    #[test]
    fn mean_and_median_statistics() {
        assert_eq!(Statistic::Mean.apply(&[1.0, 1.0, 10.0]), 4.0);
        assert_eq!(Statistic::Median.apply(&[1.0, 1.0, 10.0]), 1.0);
        assert_eq!(Statistic::Median.apply(&[1.0, 3.0]), 2.0);
        assert_eq!(Statistic::Median.apply(&[5.0]), 5.0);
    }

    #[test]
    fn unseen_state_uses_global_statistic() {
        let prefixes = deterministic_prefixes();
        let ts =
            fit_transition_system(&prefixes, Abstraction::Sequence, None, Statistic::Mean).unwrap();
        let unseen = {
            let config = SynthConfig {
                n_cases: 1,
                patterns: vec![SynthPattern::new(&["Z", "Q"], 1.0)],
                ..SynthConfig::default()
            };
            extract_prefix_log(&generate_log(&config).unwrap(), 20).remove(0)
        };
        let all_mean =
            prefixes.iter().map(|p| p.remaining_seconds()).sum::<f64>() / prefixes.len() as f64;
        assert_eq!(ts.predict(&unseen), all_mean);
    }

    #[test]
    fn abstraction_changes_state_count() {
        // looping pattern: sequence distinguishes repeats, set does not
        let config = SynthConfig {
            n_cases: 10,
            patterns: vec![SynthPattern::new(&["A", "B", "A", "B", "A"], 1.0)],
            ..SynthConfig::default()
        };
        let prefixes = extract_prefix_log(&generate_log(&config).unwrap(), 20);
        let seq =
            fit_transition_system(&prefixes, Abstraction::Sequence, None, Statistic::Mean).unwrap();
        let set =
            fit_transition_system(&prefixes, Abstraction::Set, None, Statistic::Mean).unwrap();
        let bag =
            fit_transition_system(&prefixes, Abstraction::Bag, None, Statistic::Mean).unwrap();
        assert_eq!(seq.n_states(), 4, "A, AB, ABA, ABAB");
        assert_eq!(set.n_states(), 2, "A, AB merge across repeats");
        assert_eq!(bag.n_states(), 4);
    }

    #[test]
    fn horizon_merges_distant_history() {
        let config = SynthConfig {
            n_cases: 10,
            patterns: vec![
                SynthPattern::new(&["A", "X", "E", "F"], 1.0),
                SynthPattern::new(&["B", "X", "E", "F"], 1.0),
            ],
            ..SynthConfig::default()
        };
        let prefixes = extract_prefix_log(&generate_log(&config).unwrap(), 20);
        let full =
            fit_transition_system(&prefixes, Abstraction::Sequence, None, Statistic::Mean).unwrap();
        let recent =
            fit_transition_system(&prefixes, Abstraction::Sequence, Some(2), Statistic::Mean)
                .unwrap();
        assert!(recent.n_states() < full.n_states());
        assert!(recent.annotations.contains_key("X→E"));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let err = fit_transition_system(&[], Abstraction::Set, None, Statistic::Mean);
        assert!(matches!(err, Err(PredictError::EmptyTrainingSet)));
    }
}
