//! Grouping of prefixes into buckets, one regressor per bucket.
//!
//! `single` keeps everything together. `prefix_length` groups by the
//! number of visible events. `cluster` groups by k-means over standardized
//! activity-count vectors. `state` groups by an abstraction of the visible
//! activity sequence, merging states observed fewer than `min_bucket_size`
//! times in training into a shared fallback bucket.

pub mod kmeans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::LabeledPrefix;
use kmeans::{fit_kmeans, KMeans, Scaler};

#[derive(Debug, Error)]
pub enum BucketingError {
    #[error("cannot fit a bucketer on an empty prefix set")]
    EmptyTrainingSet,
    #[error("cluster bucketing needs k >= 1")]
    BadClusterK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketingKind {
    Single,
    PrefixLength,
    Cluster,
    State,
}

impl BucketingKind {
    pub fn name(&self) -> &'static str {
        match self {
            BucketingKind::Single => "single",
            BucketingKind::PrefixLength => "prefix_length",
            BucketingKind::Cluster => "cluster",
            BucketingKind::State => "state",
        }
    }
}

/// How a visible activity sequence collapses into a state key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abstraction {
    Set,
    Bag,
    Sequence,
}

impl Abstraction {
    pub fn name(&self) -> &'static str {
        match self {
            Abstraction::Set => "set",
            Abstraction::Bag => "bag",
            Abstraction::Sequence => "sequence",
        }
    }
}

/// Canonical state key of an activity sequence. `horizon` keeps only the
/// last m activities before abstracting. Distinct abstract states always
/// map to distinct strings:
/// set `A|B|D`, bag `A:1|B:2|D:1`, sequence `A→B→D→B`.
pub fn state_key(activities: &[&str], abstraction: Abstraction, horizon: Option<usize>) -> String {
    let window: &[&str] = match horizon {
        Some(m) if m < activities.len() => &activities[activities.len() - m..],
        _ => activities,
    };
    match abstraction {
        Abstraction::Set => {
            let mut distinct: Vec<&str> = window.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct.join("|")
        }
        Abstraction::Bag => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for a in window {
                *counts.entry(a).or_insert(0) += 1;
            }
            counts
                .into_iter()
                .map(|(a, n)| format!("{a}:{n}"))
                .collect::<Vec<_>>()
                .join("|")
        }
        Abstraction::Sequence => window.join("\u{2192}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketerOptions {
    pub cluster_k: usize,
    pub abstraction: Abstraction,
    pub horizon: Option<usize>,
    /// States below this training count share the fallback bucket.
    pub min_bucket_size: usize,
}

impl Default for BucketerOptions {
    fn default() -> Self {
        BucketerOptions {
            cluster_k: 5,
            abstraction: Abstraction::Set,
            horizon: None,
            min_bucket_size: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bucketer {
    Single,
    /// Sorted distinct prefix lengths seen in training. A query length
    /// routes to itself when trained, otherwise to the nearest trained
    /// length below it, otherwise to the smallest trained length.
    PrefixLength {
        lengths: Vec<usize>,
    },
    Cluster {
        activity_vocab: Vec<String>,
        scaler: Scaler,
        kmeans: KMeans,
    },
    State {
        abstraction: Abstraction,
        horizon: Option<usize>,
        states: BTreeMap<String, u32>,
        fallback_id: u32,
    },
}

fn count_vector(prefix: &LabeledPrefix, vocab: &[String]) -> Vec<f64> {
    let mut v = vec![0.0; vocab.len()];
    for a in prefix.activities() {
        if let Some(i) = vocab.iter().position(|x| x == a) {
            v[i] += 1.0;
        }
    }
    v
}

fn prefix_state_key(
    prefix: &LabeledPrefix,
    abstraction: Abstraction,
    horizon: Option<usize>,
) -> String {
    let activities: Vec<&str> = prefix.activities().collect();
    state_key(&activities, abstraction, horizon)
}

/// Fits a bucketer on training prefixes. `warnings` collects non-fatal
/// conditions, currently only a cluster count cut down to the number of
/// distinct activity-count vectors.
pub fn fit_bucketer(
    prefixes: &[LabeledPrefix],
    kind: BucketingKind,
    options: &BucketerOptions,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<Bucketer, BucketingError> {
    if prefixes.is_empty() {
        return Err(BucketingError::EmptyTrainingSet);
    }
    match kind {
        BucketingKind::Single => Ok(Bucketer::Single),
        BucketingKind::PrefixLength => {
            let mut lengths: Vec<usize> = prefixes.iter().map(|p| p.k()).collect();
            lengths.sort_unstable();
            lengths.dedup();
            Ok(Bucketer::PrefixLength { lengths })
        }
        BucketingKind::Cluster => {
            if options.cluster_k == 0 {
                return Err(BucketingError::BadClusterK);
            }
            let mut vocab: Vec<String> = prefixes
                .iter()
                .flat_map(|p| p.activities().map(|a| a.to_string()))
                .collect();
            vocab.sort_unstable();
            vocab.dedup();
            let raw: Vec<Vec<f64>> = prefixes.iter().map(|p| count_vector(p, &vocab)).collect();
            let scaler = Scaler::fit(&raw);
            let scaled: Vec<Vec<f64>> = raw.iter().map(|p| scaler.transform(p)).collect();
            let (kmeans, info) = fit_kmeans(&scaled, options.cluster_k, seed);
            if info.effective_k < options.cluster_k {
                warnings.push(format!(
                    "cluster bucketing: k cut from {} to {} distinct activity profiles",
                    options.cluster_k, info.effective_k
                ));
            }
            Ok(Bucketer::Cluster {
                activity_vocab: vocab,
                scaler,
                kmeans,
            })
        }
        BucketingKind::State => {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for p in prefixes {
                *counts
                    .entry(prefix_state_key(p, options.abstraction, options.horizon))
                    .or_insert(0) += 1;
            }
            let mut states = BTreeMap::new();
            let mut next_id = 0u32;
            for (key, n) in counts {
                if n >= options.min_bucket_size {
                    states.insert(key, next_id);
                    next_id += 1;
                }
            }
            Ok(Bucketer::State {
                abstraction: options.abstraction,
                horizon: options.horizon,
                states,
                fallback_id: next_id,
            })
        }
    }
}

impl Bucketer {
    pub fn kind(&self) -> BucketingKind {
        match self {
            Bucketer::Single => BucketingKind::Single,
            Bucketer::PrefixLength { .. } => BucketingKind::PrefixLength,
            Bucketer::Cluster { .. } => BucketingKind::Cluster,
            Bucketer::State { .. } => BucketingKind::State,
        }
    }

    /// Bucket id for a prefix. Total: every prefix gets some id.
    pub fn assign(&self, prefix: &LabeledPrefix) -> u32 {
        match self {
            Bucketer::Single => 0,
            Bucketer::PrefixLength { lengths } => {
                let k = prefix.k();
                match lengths.binary_search(&k) {
                    Ok(i) => lengths[i] as u32,
                    Err(0) => lengths[0] as u32,
                    Err(i) => lengths[i - 1] as u32,
                }
            }
            Bucketer::Cluster {
                activity_vocab,
                scaler,
                kmeans,
            } => {
                let scaled = scaler.transform(&count_vector(prefix, activity_vocab));
                kmeans.assign(&scaled) as u32
            }
            Bucketer::State {
                abstraction,
                horizon,
                states,
                fallback_id,
            } => {
                let key = prefix_state_key(prefix, *abstraction, *horizon);
                states.get(&key).copied().unwrap_or(*fallback_id)
            }
        }
    }

    /// Ids of buckets with their own training group, in ascending order.
    /// The state fallback bucket is not included; see [`Bucketer::fallback_id`].
    pub fn bucket_ids(&self) -> Vec<u32> {
        match self {
            Bucketer::Single => vec![0],
            Bucketer::PrefixLength { lengths } => lengths.iter().map(|l| *l as u32).collect(),
            Bucketer::Cluster { kmeans, .. } => (0..kmeans.centroids.len() as u32).collect(),
            Bucketer::State { states, .. } => {
                let mut ids: Vec<u32> = states.values().copied().collect();
                ids.sort_unstable();
                ids
            }
        }
    }

    /// Id of the shared fallback bucket for rare or unseen states.
    pub fn fallback_id(&self) -> Option<u32> {
        match self {
            Bucketer::State { fallback_id, .. } => Some(*fallback_id),
            _ => None,
        }
    }
}
