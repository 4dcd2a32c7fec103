//! Trained predictors and the method abstraction tying bucketing,
//! encoding and regressor together.
//!
//! A method is described by a [`MethodDescriptor`]; [`fit_method`] turns
//! it plus training prefixes into a self-contained [`ModelBundle`] that
//! predicts remaining seconds for any prefix and can be saved to and
//! loaded from a directory without changing its predictions.

pub mod bundle;
pub mod gbt;
pub mod transition;
pub mod tree;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bucketing::{
    fit_bucketer, Abstraction, Bucketer, BucketerOptions, BucketingError, BucketingKind,
};
use crate::encoding::{
    encode, fit_schema, EncodeOptions, EncodingError, EncodingKind, FeatureSchema,
};
use crate::eventlog::{AttributeSchema, LabeledPrefix};
use gbt::{fit_gbt, GbtModel, GbtParams};
use transition::{fit_transition_system, Statistic, TransitionSystem};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no training prefixes")]
    EmptyTrainingSet,
    #[error("rows ({rows}) and targets ({targets}) differ in length")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("feature width mismatch: model expects {expected}, row has {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("descriptor for a boosted method needs bucketing and encoding")]
    IncompleteDescriptor,
    #[error("bucket {id} has neither a model nor a fallback")]
    MissingBucket { id: u32 },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Bucketing(#[from] BucketingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Gbt,
    TransitionSystem,
    MeanBaseline,
}

impl PredictorKind {
    pub fn name(&self) -> &'static str {
        match self {
            PredictorKind::Gbt => "gbt",
            PredictorKind::TransitionSystem => "transition_system",
            PredictorKind::MeanBaseline => "mean_baseline",
        }
    }
}

/// Everything tunable about a method. Irrelevant fields for a given
/// predictor kind are simply ignored, which keeps grid handling uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub gbt: GbtParams,
    pub cluster_k: usize,
    pub min_bucket_size: usize,
    pub abstraction: Abstraction,
    pub horizon: Option<usize>,
    pub statistic: Statistic,
    /// Longest prefix considered; pads index encodings under
    /// non-length-based bucketing.
    pub max_prefix: usize,
    pub extra_aggregates: bool,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            gbt: GbtParams::default(),
            cluster_k: 5,
            min_bucket_size: 30,
            abstraction: Abstraction::Set,
            horizon: None,
            statistic: Statistic::Mean,
            max_prefix: 20,
            extra_aggregates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDescriptor {
    pub name: String,
    pub predictor: PredictorKind,
    pub bucketing: Option<BucketingKind>,
    pub encoding: Option<EncodingKind>,
    pub params: MethodParams,
    pub seed: u64,
}

fn bucketing_short(kind: BucketingKind) -> &'static str {
    match kind {
        BucketingKind::Single => "single",
        BucketingKind::PrefixLength => "prefix",
        BucketingKind::Cluster => "cluster",
        BucketingKind::State => "state",
    }
}

impl MethodDescriptor {
    pub fn gbt(
        bucketing: BucketingKind,
        encoding: EncodingKind,
        params: MethodParams,
        seed: u64,
    ) -> Self {
        MethodDescriptor {
            name: format!("{}_{}", bucketing_short(bucketing), encoding.short_name()),
            predictor: PredictorKind::Gbt,
            bucketing: Some(bucketing),
            encoding: Some(encoding),
            params,
            seed,
        }
    }

    pub fn transition_system(params: MethodParams, seed: u64) -> Self {
        MethodDescriptor {
            name: format!("ts_{}", params.abstraction.name()),
            predictor: PredictorKind::TransitionSystem,
            bucketing: None,
            encoding: None,
            params,
            seed,
        }
    }

    pub fn mean_baseline(seed: u64) -> Self {
        MethodDescriptor {
            name: "baseline".into(),
            predictor: PredictorKind::MeanBaseline,
            bucketing: None,
            encoding: None,
            params: MethodParams::default(),
            seed,
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Per-prefix-length mean of the training labels; lengths unseen in
/// training get the overall mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanBaseline {
    pub per_k: BTreeMap<usize, f64>,
    pub global: f64,
}

impl MeanBaseline {
    pub fn fit(prefixes: &[LabeledPrefix]) -> Result<Self, PredictError> {
        if prefixes.is_empty() {
            return Err(PredictError::EmptyTrainingSet);
        }
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        let mut total = 0.0;
        for p in prefixes {
            let entry = sums.entry(p.k()).or_insert((0.0, 0));
            entry.0 += p.remaining_seconds();
            entry.1 += 1;
            total += p.remaining_seconds();
        }
        Ok(MeanBaseline {
            per_k: sums
                .into_iter()
                .map(|(k, (sum, n))| (k, sum / n as f64))
                .collect(),
            global: total / prefixes.len() as f64,
        })
    }

    pub fn predict(&self, k: usize) -> f64 {
        self.per_k.get(&k).copied().unwrap_or(self.global)
    }
}

/// A per-bucket regressor with the feature schema it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketModel {
    pub schema: FeatureSchema,
    pub model: GbtModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedPredictor {
    Bucketed {
        bucketer: Bucketer,
        models: BTreeMap<u32, BucketModel>,
        /// Regressor over all training prefixes, used for buckets without
        /// training data and for the rare-state bucket.
        fallback: Option<Box<BucketModel>>,
    },
    Transition(TransitionSystem),
    Baseline(MeanBaseline),
}

/// Provenance of a fit: which cases the training prefixes came from and
/// when the training period ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// SHA-256 over the sorted distinct case ids seen in training. Any
    /// extra or missing case changes the digest.
    pub train_case_fingerprint: String,
    pub n_train_cases: usize,
    pub n_train_prefixes: usize,
    /// Latest case start among the training prefixes, epoch seconds.
    pub train_period_end: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub descriptor: MethodDescriptor,
    pub predictor: TrainedPredictor,
    pub metadata: TrainingMetadata,
}

/// Digest over sorted distinct case ids; the training audit trail.
pub fn case_fingerprint<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let sorted: BTreeSet<&str> = ids.into_iter().collect();
    let mut hasher = Sha256::new();
    for id in &sorted {
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn training_metadata(prefixes: &[LabeledPrefix]) -> TrainingMetadata {
    let ids: BTreeSet<&str> = prefixes.iter().map(|p| p.case_id()).collect();
    let end = prefixes
        .iter()
        .map(|p| p.events()[0].timestamp)
        .max()
        .unwrap_or(0);
    TrainingMetadata {
        train_case_fingerprint: case_fingerprint(ids.iter().copied()),
        n_train_cases: ids.len(),
        n_train_prefixes: prefixes.len(),
        train_period_end: end,
    }
}

/// Seed for a sub-fit, decorrelated from sibling fits by `salt`.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn encode_options(
    encoding: EncodingKind,
    bucketing: BucketingKind,
    params: &MethodParams,
) -> EncodeOptions {
    EncodeOptions {
        // under length-based bucketing every prefix in a bucket has the
        // same length, so the fitted maximum is that length; any other
        // bucketing pads up to the configured cap
        index_length: match (encoding, bucketing) {
            (EncodingKind::Index, BucketingKind::PrefixLength) => None,
            (EncodingKind::Index, _) => Some(params.max_prefix),
            _ => None,
        },
        extra_aggregates: params.extra_aggregates,
    }
}

fn fit_bucket_model(
    prefixes: &[LabeledPrefix],
    encoding: EncodingKind,
    bucketing: BucketingKind,
    attr_schema: &AttributeSchema,
    params: &MethodParams,
    seed: u64,
) -> Result<BucketModel, PredictError> {
    let schema = fit_schema(
        prefixes,
        encoding,
        attr_schema,
        &encode_options(encoding, bucketing, params),
    )?;
    let mut rows = Vec::with_capacity(prefixes.len());
    let mut targets = Vec::with_capacity(prefixes.len());
    for p in prefixes {
        let fv = encode(p, &schema);
        rows.push(fv.values);
        targets.push(fv.label);
    }
    let model = fit_gbt(&rows, &targets, &params.gbt, seed)?;
    Ok(BucketModel { schema, model })
}

/// Trains a method on labeled prefixes. The returned bundle observes only
/// these prefixes; its metadata fingerprint proves which cases were seen.
pub fn fit_method(
    prefixes: &[LabeledPrefix],
    attr_schema: &AttributeSchema,
    descriptor: &MethodDescriptor,
    warnings: &mut Vec<String>,
) -> Result<ModelBundle, PredictError> {
    if prefixes.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let metadata = training_metadata(prefixes);
    let params = &descriptor.params;

    let predictor = match descriptor.predictor {
        PredictorKind::MeanBaseline => TrainedPredictor::Baseline(MeanBaseline::fit(prefixes)?),
        PredictorKind::TransitionSystem => TrainedPredictor::Transition(fit_transition_system(
            prefixes,
            params.abstraction,
            params.horizon,
            params.statistic,
        )?),
        PredictorKind::Gbt => {
            let (bucketing, encoding) = match (descriptor.bucketing, descriptor.encoding) {
                (Some(b), Some(e)) => (b, e),
                _ => return Err(PredictError::IncompleteDescriptor),
            };
            let options = BucketerOptions {
                cluster_k: params.cluster_k,
                abstraction: params.abstraction,
                horizon: params.horizon,
                min_bucket_size: params.min_bucket_size,
            };
            let bucketer = fit_bucketer(prefixes, bucketing, &options, descriptor.seed, warnings)?;

            let mut groups: BTreeMap<u32, Vec<LabeledPrefix>> = BTreeMap::new();
            for p in prefixes {
                groups
                    .entry(bucketer.assign(p))
                    .or_default()
                    .push(p.clone());
            }

            let mut models = BTreeMap::new();
            let mut needs_fallback = bucketer.fallback_id().is_some();
            for id in bucketer.bucket_ids() {
                match groups.get(&id) {
                    Some(group) if !group.is_empty() => {
                        let model = fit_bucket_model(
                            group,
                            encoding,
                            bucketing,
                            attr_schema,
                            params,
                            mix_seed(descriptor.seed, id as u64),
                        )?;
                        models.insert(id, model);
                    }
                    _ => needs_fallback = true,
                }
            }
            let fallback = if needs_fallback {
                Some(Box::new(fit_bucket_model(
                    prefixes,
                    encoding,
                    bucketing,
                    attr_schema,
                    params,
                    mix_seed(descriptor.seed, u64::MAX),
                )?))
            } else {
                None
            };
            TrainedPredictor::Bucketed {
                bucketer,
                models,
                fallback,
            }
        }
    };

    Ok(ModelBundle {
        descriptor: descriptor.clone(),
        predictor,
        metadata,
    })
}

impl ModelBundle {
    /// Remaining seconds predicted for a prefix, never negative.
    pub fn predict(&self, prefix: &LabeledPrefix) -> Result<f64, PredictError> {
        match &self.predictor {
            TrainedPredictor::Baseline(b) => Ok(b.predict(prefix.k())),
            TrainedPredictor::Transition(ts) => Ok(ts.predict(prefix)),
            TrainedPredictor::Bucketed {
                bucketer,
                models,
                fallback,
            } => {
                let id = bucketer.assign(prefix);
                let bucket_model = models
                    .get(&id)
                    .or(fallback.as_deref())
                    .ok_or(PredictError::MissingBucket { id })?;
                let fv = encode(prefix, &bucket_model.schema);
                bucket_model.model.predict(&fv.values)
            }
        }
    }

    pub fn predict_all(&self, prefixes: &[LabeledPrefix]) -> Result<Vec<f64>, PredictError> {
        prefixes.iter().map(|p| self.predict(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::extract_prefix_log;
    use crate::synth::{generate_log, SynthConfig, SynthPattern};

    /// Remaining time is a deterministic function of the visible events:
    /// the first activity reveals the branch and each branch has fixed
    /// gaps.
    fn branching_log(n_cases: usize, seed: u64) -> crate::eventlog::EventLog {
        let config = SynthConfig {
            n_cases,
            patterns: vec![
                SynthPattern::with_gaps(&["A", "C", "E"], 1.0, &[10.0, 100.0]),
                SynthPattern::with_gaps(&["B", "D", "E"], 1.0, &[100.0, 1000.0]),
            ],
            seed,
            ..SynthConfig::default()
        };
        generate_log(&config).unwrap()
    }

    fn strong_gbt() -> MethodParams {
        MethodParams {
            gbt: GbtParams {
                n_estimators: 120,
                learning_rate: 0.3,
                subsample: 1.0,
                colsample: 1.0,
                max_depth: 4,
                min_leaf: 1,
            },
            ..MethodParams::default()
        }
    }

    #[test]
    fn single_bucket_gbt_learns_branching_times() {
        let log = branching_log(60, 0);
        let prefixes = extract_prefix_log(&log, 20);
        let descriptor = MethodDescriptor::gbt(
            BucketingKind::Single,
            EncodingKind::LastState,
            strong_gbt(),
            0,
        );
        let bundle = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
        for p in &prefixes {
            let got = bundle.predict(p).unwrap();
            let want = p.remaining_seconds();
            assert!(
                (got - want).abs() < 0.05 * want.max(20.0),
                "k={} want {want} got {got}",
                p.k()
            );
        }
    }

    #[test]
    fn every_bucketing_produces_a_working_bundle() {
        let log = branching_log(40, 1);
        let prefixes = extract_prefix_log(&log, 20);
        for bucketing in [
            BucketingKind::Single,
            BucketingKind::PrefixLength,
            BucketingKind::Cluster,
            BucketingKind::State,
        ] {
            for encoding in [
                EncodingKind::LastState,
                EncodingKind::Aggregation,
                EncodingKind::Index,
            ] {
                let params = MethodParams {
                    gbt: GbtParams {
                        n_estimators: 15,
                        ..GbtParams::default()
                    },
                    cluster_k: 2,
                    min_bucket_size: 10,
                    ..MethodParams::default()
                };
                let descriptor = MethodDescriptor::gbt(bucketing, encoding, params, 3);
                let bundle = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
                for p in &prefixes {
                    let y = bundle.predict(p).unwrap();
                    assert!(y.is_finite() && y >= 0.0);
                }
            }
        }
    }

    #[test]
    fn prefix_length_index_schemas_grow_with_k() {
        let log = branching_log(30, 2);
        let prefixes = extract_prefix_log(&log, 20);
        let descriptor = MethodDescriptor::gbt(
            BucketingKind::PrefixLength,
            EncodingKind::Index,
            MethodParams {
                gbt: GbtParams {
                    n_estimators: 5,
                    ..GbtParams::default()
                },
                ..MethodParams::default()
            },
            0,
        );
        let bundle = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
        let TrainedPredictor::Bucketed { models, .. } = &bundle.predictor else {
            panic!("expected bucketed predictor");
        };
        assert_eq!(models[&1].schema.index_length, Some(1));
        assert_eq!(models[&2].schema.index_length, Some(2));
        assert!(models[&2].schema.width() > models[&1].schema.width());
    }

    #[test]
    fn state_bucketing_rare_states_use_fallback() {
        let config = SynthConfig {
            n_cases: 41,
            patterns: vec![
                SynthPattern::new(&["A", "B", "C"], 40.0),
                SynthPattern::new(&["X", "Y", "Z"], 1.0),
            ],
            seed: 2,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).unwrap();
        let prefixes = extract_prefix_log(&log, 20);
        let descriptor = MethodDescriptor::gbt(
            BucketingKind::State,
            EncodingKind::LastState,
            MethodParams {
                gbt: GbtParams {
                    n_estimators: 10,
                    ..GbtParams::default()
                },
                min_bucket_size: 30,
                ..MethodParams::default()
            },
            0,
        );
        let bundle = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
        let TrainedPredictor::Bucketed {
            bucketer, fallback, ..
        } = &bundle.predictor
        else {
            panic!("expected bucketed predictor");
        };
        assert!(fallback.is_some(), "state bucketing always has a fallback");
        let rare = prefixes
            .iter()
            .find(|p| p.activities().next() == Some("X"))
            .unwrap();
        assert_eq!(bucketer.assign(rare), bucketer.fallback_id().unwrap());
        assert!(bundle.predict(rare).unwrap().is_finite());
    }

    #[test]
    fn baseline_predicts_per_length_means() {
        let log = branching_log(50, 4);
        let prefixes = extract_prefix_log(&log, 20);
        let bundle = fit_method(
            &prefixes,
            &log.schema,
            &MethodDescriptor::mean_baseline(0),
            &mut vec![],
        )
        .unwrap();
        let k1: Vec<f64> = prefixes
            .iter()
            .filter(|p| p.k() == 1)
            .map(|p| p.remaining_seconds())
            .collect();
        let want = k1.iter().sum::<f64>() / k1.len() as f64;
        let p1 = prefixes.iter().find(|p| p.k() == 1).unwrap();
        assert_eq!(bundle.predict(p1).unwrap(), want);
    }

    #[test]
    fn metadata_fingerprint_tracks_observed_cases() {
        let log = branching_log(20, 5);
        let prefixes = extract_prefix_log(&log, 20);
        let bundle = fit_method(
            &prefixes,
            &log.schema,
            &MethodDescriptor::mean_baseline(0),
            &mut vec![],
        )
        .unwrap();
        let expected = case_fingerprint(log.traces.iter().map(|t| t.case_id.as_str()));
        assert_eq!(bundle.metadata.train_case_fingerprint, expected);
        assert_eq!(bundle.metadata.n_train_cases, 20);
        // any different case set changes the digest
        let other = case_fingerprint(log.traces.iter().skip(1).map(|t| t.case_id.as_str()));
        assert_ne!(other, expected);
    }

    #[test]
    fn refit_is_bit_identical() {
        let log = branching_log(30, 6);
        let prefixes = extract_prefix_log(&log, 20);
        let descriptor = MethodDescriptor::gbt(
            BucketingKind::Cluster,
            EncodingKind::Aggregation,
            MethodParams {
                gbt: GbtParams {
                    n_estimators: 10,
                    ..GbtParams::default()
                },
                cluster_k: 3,
                ..MethodParams::default()
            },
            9,
        );
        let a = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
        let b = fit_method(&prefixes, &log.schema, &descriptor, &mut vec![]).unwrap();
        assert_eq!(a, b);
    }
}
