//! Remaining-time prediction for business process event logs.
//!
//! Given a log of completed cases, the crate builds models that estimate,
//! at any point during a running case, how many seconds remain until the
//! case completes. A model is a combination of three choices:
//!
//! * how case prefixes are grouped into buckets ([`bucketing`]),
//! * how each prefix becomes a fixed-width feature vector ([`encoding`]),
//! * which regressor predicts the remaining time per bucket ([`predict`]).
//!
//! Besides bucketed gradient-boosted trees the crate ships an annotated
//! transition system and a per-length mean baseline. The [`evaluate`]
//! module implements the benchmark protocol: a temporal train/test split,
//! cross-validated hyperparameter search, mean absolute error by prefix
//! length, and cross-dataset method ranking. The `remtime` binary drives
//! the whole pipeline from a TOML config.

pub mod bucketing;
pub mod cli;
pub mod config;
pub mod encoding;
pub mod evaluate;
pub mod eventlog;
pub mod predict;
pub mod sample;
pub mod synth;
