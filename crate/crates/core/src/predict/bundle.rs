//! Saving a [`ModelBundle`](super::ModelBundle) to a directory and
//! loading it back, with bit-identical predictions after the round trip.
//!
//! Layout:
//!
//! ```text
//! <dir>/descriptor.json
//! <dir>/metadata.json
//! <dir>/bucketer.json            (bucketed predictors)
//! <dir>/bucket_<id>/schema.json
//! <dir>/bucket_<id>/model.json
//! <dir>/bucket_fallback/...      (when a fallback model exists)
//! <dir>/model.json               (transition system, baseline)
//! ```

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};
use thiserror::Error;

use super::{
    BucketModel, MeanBaseline, MethodDescriptor, ModelBundle, PredictorKind, TrainedPredictor,
    TrainingMetadata,
};
use crate::bucketing::Bucketer;
use crate::predict::transition::TransitionSystem;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bundle serialization: {0}")]
    Json(#[from] serde_json::Error),
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BundleError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, BundleError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_bucket_model(dir: &Path, model: &BucketModel) -> Result<(), BundleError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("schema.json"), &model.schema)?;
    write_json(&dir.join("model.json"), &model.model)
}

fn read_bucket_model(dir: &Path) -> Result<BucketModel, BundleError> {
    Ok(BucketModel {
        schema: read_json(&dir.join("schema.json"))?,
        model: read_json(&dir.join("model.json"))?,
    })
}

impl ModelBundle {
    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("descriptor.json"), &self.descriptor)?;
        write_json(&dir.join("metadata.json"), &self.metadata)?;
        match &self.predictor {
            TrainedPredictor::Baseline(b) => write_json(&dir.join("model.json"), b)?,
            TrainedPredictor::Transition(ts) => write_json(&dir.join("model.json"), ts)?,
            TrainedPredictor::Bucketed {
                bucketer,
                models,
                fallback,
            } => {
                write_json(&dir.join("bucketer.json"), bucketer)?;
                for (id, model) in models {
                    write_bucket_model(&dir.join(format!("bucket_{id}")), model)?;
                }
                if let Some(model) = fallback {
                    write_bucket_model(&dir.join("bucket_fallback"), model)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ModelBundle, BundleError> {
        let descriptor: MethodDescriptor = read_json(&dir.join("descriptor.json"))?;
        let metadata: TrainingMetadata = read_json(&dir.join("metadata.json"))?;
        let predictor = match descriptor.predictor {
            PredictorKind::MeanBaseline => {
                TrainedPredictor::Baseline(read_json::<MeanBaseline>(&dir.join("model.json"))?)
            }
            PredictorKind::TransitionSystem => {
                TrainedPredictor::Transition(read_json::<TransitionSystem>(
                    &dir.join("model.json"),
                )?)
            }
            PredictorKind::Gbt => {
                let bucketer: Bucketer = read_json(&dir.join("bucketer.json"))?;
                let mut models = std::collections::BTreeMap::new();
                for id in bucketer.bucket_ids() {
                    let bucket_dir = dir.join(format!("bucket_{id}"));
                    if bucket_dir.is_dir() {
                        models.insert(id, read_bucket_model(&bucket_dir)?);
                    }
                }
                let fallback_dir = dir.join("bucket_fallback");
                let fallback = if fallback_dir.is_dir() {
                    Some(Box::new(read_bucket_model(&fallback_dir)?))
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
            descriptor,
            predictor,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bucketing::BucketingKind;
    use crate::encoding::EncodingKind;
    use crate::eventlog::extract_prefix_log;
    use crate::predict::gbt::GbtParams;
    use crate::predict::{fit_method, MethodParams};
    use crate::synth::{generate_log, SynthConfig, SynthPattern};

    fn sample_log(seed: u64) -> crate::eventlog::EventLog {
        let config = SynthConfig {
            n_cases: 35,
            patterns: vec![
                SynthPattern::with_gaps(&["A", "C", "E"], 1.0, &[10.0, 100.0]),
                SynthPattern::with_gaps(&["B", "D", "E"], 1.0, &[100.0, 1000.0]),
            ],
            seed,
            ..SynthConfig::default()
        };
        generate_log(&config).unwrap()
    }

    fn assert_round_trip(descriptor: &crate::predict::MethodDescriptor) {
        let log = sample_log(11);
        let prefixes = extract_prefix_log(&log, 20);
        let bundle = fit_method(&prefixes, &log.schema, descriptor, &mut vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let loaded = ModelBundle::load(dir.path()).unwrap();
        assert_eq!(loaded, bundle);
        for p in &prefixes {
            let before = bundle.predict(p).unwrap();
            let after = loaded.predict(p).unwrap();
            assert_eq!(before.to_bits(), after.to_bits());
        }
    }

    #[test]
    fn gbt_bundle_round_trips_bit_identical() {
        for bucketing in [
            BucketingKind::Single,
            BucketingKind::PrefixLength,
            BucketingKind::Cluster,
            BucketingKind::State,
        ] {
            let descriptor = crate::predict::MethodDescriptor::gbt(
                bucketing,
                EncodingKind::Aggregation,
                MethodParams {
                    gbt: GbtParams {
                        n_estimators: 10,
                        ..GbtParams::default()
                    },
                    cluster_k: 2,
                    min_bucket_size: 5,
                    ..MethodParams::default()
                },
                7,
            );
            assert_round_trip(&descriptor);
        }
    }

    #[test]
    fn transition_bundle_round_trips() {
        assert_round_trip(&crate::predict::MethodDescriptor::transition_system(
            MethodParams::default(),
            0,
        ));
    }

    #[test]
    fn baseline_bundle_round_trips() {
        assert_round_trip(&crate::predict::MethodDescriptor::mean_baseline(0));
    }

    #[test]
    fn load_from_missing_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(ModelBundle::load(&missing).is_err());
    }
}
