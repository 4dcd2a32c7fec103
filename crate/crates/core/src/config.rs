//! Declarative run configuration: one TOML file describes the log, its
//! attributes, preprocessing, the methods to benchmark and the
//! hyperparameter search space.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bucketing::{Abstraction, BucketingKind};
use crate::encoding::EncodingKind;
use crate::eventlog::{
    AttrDef, AttrKind, AttrScope, AttributeSchema, ColumnMapping, PreprocessConfig,
};
use crate::predict::gbt::GbtParams;
use crate::predict::transition::Statistic;
use crate::predict::{MethodDescriptor, MethodParams, PredictorKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogConfig {
    pub path: PathBuf,
    #[serde(default = "d_case_id")]
    pub case_id: String,
    #[serde(default = "d_activity")]
    pub activity: String,
    #[serde(default = "d_timestamp")]
    pub timestamp: String,
    #[serde(default = "d_timestamp_format")]
    pub timestamp_format: String,
}

fn d_case_id() -> String {
    "case_id".into()
}
fn d_activity() -> String {
    "activity".into()
}
fn d_timestamp() -> String {
    "timestamp".into()
}
fn d_timestamp_format() -> String {
    crate::eventlog::DEFAULT_TIMESTAMP_FORMAT.into()
}

impl LogConfig {
    pub fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            case_id: self.case_id.clone(),
            activity: self.activity.clone(),
            timestamp: self.timestamp.clone(),
            timestamp_format: self.timestamp_format.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConfig {
    pub name: String,
    pub kind: AttrKind,
    pub scope: AttrScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub predictor: PredictorKind,
    #[serde(default)]
    pub bucketing: Option<BucketingKind>,
    #[serde(default)]
    pub encoding: Option<EncodingKind>,
    /// Overrides the auto-generated method name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub abstraction: Option<Abstraction>,
    #[serde(default)]
    pub statistic: Option<Statistic>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub min_bucket_size: Option<usize>,
    #[serde(default)]
    pub extra_aggregates: Option<bool>,
}

/// Search-space axes; defaults reproduce the stock grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Disable to fit every method with its default hyperparameters.
    #[serde(default = "d_true")]
    pub enabled: bool,
    #[serde(default = "d_n_estimators")]
    pub n_estimators: Vec<usize>,
    #[serde(default = "d_learning_rate")]
    pub learning_rate: Vec<f64>,
    #[serde(default = "d_subsample")]
    pub subsample: Vec<f64>,
    #[serde(default = "d_colsample")]
    pub colsample: Vec<f64>,
    #[serde(default = "d_max_depth")]
    pub max_depth: Vec<usize>,
    #[serde(default = "d_cluster_k")]
    pub cluster_k: Vec<usize>,
}

fn d_true() -> bool {
    true
}
fn d_n_estimators() -> Vec<usize> {
    vec![250, 500]
}
fn d_learning_rate() -> Vec<f64> {
    vec![0.02, 0.04, 0.06]
}
fn d_subsample() -> Vec<f64> {
    vec![0.5, 0.8]
}
fn d_colsample() -> Vec<f64> {
    vec![0.5, 0.8]
}
fn d_max_depth() -> Vec<usize> {
    vec![3, 6]
}
fn d_cluster_k() -> Vec<usize> {
    vec![2, 5, 10]
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            enabled: true,
            n_estimators: d_n_estimators(),
            learning_rate: d_learning_rate(),
            subsample: d_subsample(),
            colsample: d_colsample(),
            max_depth: d_max_depth(),
            cluster_k: d_cluster_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory: runs are never silently nondeterministic.
    pub seed: u64,
    pub dataset: String,
    pub output_dir: PathBuf,
    #[serde(default = "d_max_prefix")]
    pub max_prefix: usize,
    #[serde(default = "d_train_ratio")]
    pub train_ratio: f64,
    #[serde(default = "d_cv_folds")]
    pub cv_folds: usize,
    /// Per-method budget covering grid search and the final fit.
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    pub log: LogConfig,
    #[serde(default)]
    pub attributes: Vec<AttributeConfig>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub grid: GridConfig,
}

fn d_max_prefix() -> usize {
    20
}
fn d_train_ratio() -> f64 {
    0.8
}
fn d_cv_folds() -> usize {
    5
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("no methods configured".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "train_ratio must lie strictly between 0 and 1, got {}",
                self.train_ratio
            )));
        }
        if self.cv_folds < 2 {
            return Err(ConfigError::Invalid(format!(
                "cv_folds must be at least 2, got {}",
                self.cv_folds
            )));
        }
        if self.max_prefix == 0 {
            return Err(ConfigError::Invalid("max_prefix must be positive".into()));
        }
        let descriptors = self.descriptors()?;
        let mut names = BTreeSet::new();
        for d in &descriptors {
            if !names.insert(d.name.clone()) {
                return Err(ConfigError::Invalid(format!(
                    "duplicate method name {:?}; set an explicit name",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> AttributeSchema {
        AttributeSchema::new(
            self.attributes
                .iter()
                .map(|a| AttrDef::new(&a.name, a.kind, a.scope))
                .collect(),
        )
    }

    /// One descriptor per configured method, in config order, all seeded
    /// from the run seed.
    pub fn descriptors(&self) -> Result<Vec<MethodDescriptor>, ConfigError> {
        self.methods.iter().map(|m| self.descriptor(m)).collect()
    }

    fn descriptor(&self, method: &MethodConfig) -> Result<MethodDescriptor, ConfigError> {
        let mut params = MethodParams {
            max_prefix: self.max_prefix,
            ..MethodParams::default()
        };
        if let Some(a) = method.abstraction {
            params.abstraction = a;
        }
        if let Some(s) = method.statistic {
            params.statistic = s;
        }
        if method.horizon.is_some() {
            params.horizon = method.horizon;
        }
        if let Some(m) = method.min_bucket_size {
            params.min_bucket_size = m;
        }
        if let Some(x) = method.extra_aggregates {
            params.extra_aggregates = x;
        }
        let mut descriptor = match method.predictor {
            PredictorKind::MeanBaseline => MethodDescriptor::mean_baseline(self.seed),
            PredictorKind::TransitionSystem => {
                MethodDescriptor::transition_system(params.clone(), self.seed)
            }
            PredictorKind::Gbt => {
                let (bucketing, encoding) = match (method.bucketing, method.encoding) {
                    (Some(b), Some(e)) => (b, e),
                    _ => {
                        return Err(ConfigError::Invalid(
                            "gbt methods need both `bucketing` and `encoding`".into(),
                        ))
                    }
                };
                MethodDescriptor::gbt(bucketing, encoding, params.clone(), self.seed)
            }
        };
        descriptor.params = params;
        if let Some(name) = &method.name {
            descriptor = descriptor.with_name(name);
        }
        Ok(descriptor)
    }

    /// The grid for one method, mirroring the stock grid but over the
    /// configured axes. With the grid disabled every method keeps its
    /// descriptor parameters.
    pub fn grid_for(&self, descriptor: &MethodDescriptor) -> Vec<MethodParams> {
        if !self.grid.enabled {
            return vec![descriptor.params.clone()];
        }
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
                let cluster_ks: &[usize] = if descriptor.bucketing == Some(BucketingKind::Cluster) {
                    &self.grid.cluster_k
                } else {
                    std::slice::from_ref(&base.cluster_k)
                };
                let mut points = Vec::new();
                for &cluster_k in cluster_ks {
                    for &n_estimators in &self.grid.n_estimators {
                        for &learning_rate in &self.grid.learning_rate {
                            for &subsample in &self.grid.subsample {
                                for &colsample in &self.grid.colsample {
                                    for &max_depth in &self.grid.max_depth {
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
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Top-level scalars in `extra` must precede any table header.
    fn minimal(extra: &str) -> String {
        format!(
            r#"
seed = 42
dataset = "demo"
output_dir = "out"

{extra}

[log]
path = "log.csv"
"#
        )
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let text = minimal("[[methods]]\npredictor = \"mean_baseline\"\n");
        let config = RunConfig::from_toml(&text).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.max_prefix, 20);
        assert_eq!(config.train_ratio, 0.8);
        assert_eq!(config.cv_folds, 5);
        assert_eq!(config.log.case_id, "case_id");
        assert_eq!(config.preprocess.rare_case_threshold, 10);
        assert!(config.grid.enabled);
        let descriptors = config.descriptors().unwrap();
        assert_eq!(descriptors.len(), 1);
        assert_eq!(descriptors[0].name, "baseline");
        assert_eq!(descriptors[0].seed, 42);
    }

    #[test]
    fn full_config_round_trips_methods() {
        let text = minimal(
            r#"
max_prefix = 10
train_ratio = 0.7
cv_folds = 3
timeout_secs = 60

[[attributes]]
name = "Channel"
kind = "categorical"
scope = "case"

[[attributes]]
name = "Cost"
kind = "numeric"
scope = "event"

[preprocess]
incomplete_markers = ["Incomplete"]
rare_case_threshold = 4

[[methods]]
predictor = "gbt"
bucketing = "cluster"
encoding = "aggregation"

[[methods]]
predictor = "transition_system"
abstraction = "sequence"
statistic = "median"

[[methods]]
predictor = "mean_baseline"

[grid]
n_estimators = [50]
learning_rate = [0.1]
subsample = [1.0]
colsample = [1.0]
max_depth = [3]
cluster_k = [2, 3]
"#,
        );
        let config = RunConfig::from_toml(&text).unwrap();
        assert_eq!(config.schema().attrs.len(), 2);
        assert_eq!(config.preprocess.incomplete_markers, vec!["Incomplete"]);
        let descriptors = config.descriptors().unwrap();
        assert_eq!(descriptors.len(), 3);
        assert_eq!(descriptors[0].name, "cluster_agg");
        assert_eq!(descriptors[0].params.max_prefix, 10);
        assert_eq!(descriptors[1].name, "ts_sequence");
        assert_eq!(descriptors[1].params.statistic, Statistic::Median);
        let grid = config.grid_for(&descriptors[0]);
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[0].cluster_k, 2);
        assert_eq!(grid[1].cluster_k, 3);
        assert_eq!(config.grid_for(&descriptors[1]).len(), 3);
        assert_eq!(config.grid_for(&descriptors[2]).len(), 1);
    }

    #[test]
    fn disabled_grid_keeps_descriptor_params() {
        let text = minimal(
            "[[methods]]\npredictor = \"gbt\"\nbucketing = \"single\"\nencoding = \"last_state\"\n\n[grid]\nenabled = false\n",
        );
        let config = RunConfig::from_toml(&text).unwrap();
        let d = &config.descriptors().unwrap()[0];
        let grid = config.grid_for(d);
        assert_eq!(grid, vec![d.params.clone()]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let missing_seed = "dataset = \"d\"\noutput_dir = \"o\"\n[log]\npath = \"l.csv\"\n[[methods]]\npredictor = \"mean_baseline\"\n";
        assert!(RunConfig::from_toml(missing_seed).is_err());

        let missing_methods = minimal("");
        assert!(RunConfig::from_toml(&missing_methods).is_err());

        let empty_methods = minimal("methods = []");
        assert!(matches!(
            RunConfig::from_toml(&empty_methods),
            Err(ConfigError::Invalid(_))
        ));

        let gbt_without_encoding =
            minimal("[[methods]]\npredictor = \"gbt\"\nbucketing = \"single\"\n");
        assert!(RunConfig::from_toml(&gbt_without_encoding).is_err());

        let duplicate = minimal(
            "[[methods]]\npredictor = \"mean_baseline\"\n\n[[methods]]\npredictor = \"mean_baseline\"\n",
        );
        let err = RunConfig::from_toml(&duplicate).unwrap_err();
        assert!(err.to_string().contains("duplicate method name"));

        let bad_ratio = minimal("train_ratio = 1.5\n[[methods]]\npredictor = \"mean_baseline\"\n");
        assert!(RunConfig::from_toml(&bad_ratio).is_err());

        let unknown_field = minimal("[[methods]]\npredictor = \"mean_baseline\"\nbogus = 1\n");
        assert!(RunConfig::from_toml(&unknown_field).is_err());
    }

    #[test]
    fn explicit_names_resolve_duplicates() {
        let text = minimal(
            "[[methods]]\npredictor = \"mean_baseline\"\nname = \"base_a\"\n\n[[methods]]\npredictor = \"mean_baseline\"\nname = \"base_b\"\n",
        );
        let config = RunConfig::from_toml(&text).unwrap();
        let names: Vec<_> = config
            .descriptors()
            .unwrap()
            .into_iter()
            .map(|d| d.name)
            .collect();
        assert_eq!(names, vec!["base_a", "base_b"]);
    }
}
