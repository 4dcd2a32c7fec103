//! Python bindings for the remtime toolkit. The module mirrors the Rust
//! workflow: load or synthesize an event log, split it in time, fit a
//! method (optionally tuning it on a cross-validated grid), evaluate the
//! earliness curve, and persist the trained bundle.

// The pymethods expansion inserts error conversions clippy flags as
// redundant; the lint has no signal in this thin binding layer.
#![allow(clippy::useless_conversion)]

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use remtime::bucketing::{Abstraction, BucketingKind};
use remtime::encoding::EncodingKind;
use remtime::evaluate::grid::{default_grid, grid_search};
use remtime::evaluate::ranking::{friedman_test, rank_average};
use remtime::evaluate::{earliness_curve, split_log, temporal_split, weighted_summary};
use remtime::eventlog::{
    extract_prefix_log, log_stats, parse_event_log, preprocess, write_csv, AttrDef, AttrKind,
    AttrScope, AttributeSchema, ColumnMapping, Event, EventLog, LabeledPrefix, PreprocessConfig,
    Trace, DEFAULT_TIMESTAMP_FORMAT,
};
use remtime::predict::gbt::GbtParams;
use remtime::predict::transition::Statistic;
use remtime::predict::{fit_method, MethodDescriptor, MethodParams, ModelBundle, PredictorKind};
use remtime::synth::{generate_log, SynthConfig, SynthPattern};

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_bucketing(name: &str) -> PyResult<BucketingKind> {
    match name {
        "single" => Ok(BucketingKind::Single),
        "prefix_length" => Ok(BucketingKind::PrefixLength),
        "cluster" => Ok(BucketingKind::Cluster),
        "state" => Ok(BucketingKind::State),
        other => Err(value_err(format!(
            "unknown bucketing {other:?}; expected single, prefix_length, cluster or state"
        ))),
    }
}

fn parse_encoding(name: &str) -> PyResult<EncodingKind> {
    match name {
        "last_state" => Ok(EncodingKind::LastState),
        "aggregation" => Ok(EncodingKind::Aggregation),
        "index" => Ok(EncodingKind::Index),
        other => Err(value_err(format!(
            "unknown encoding {other:?}; expected last_state, aggregation or index"
        ))),
    }
}

fn parse_abstraction(name: &str) -> PyResult<Abstraction> {
    match name {
        "set" => Ok(Abstraction::Set),
        "bag" => Ok(Abstraction::Bag),
        "sequence" => Ok(Abstraction::Sequence),
        other => Err(value_err(format!(
            "unknown abstraction {other:?}; expected set, bag or sequence"
        ))),
    }
}

fn parse_statistic(name: &str) -> PyResult<Statistic> {
    match name {
        "mean" => Ok(Statistic::Mean),
        "median" => Ok(Statistic::Median),
        other => Err(value_err(format!(
            "unknown statistic {other:?}; expected mean or median"
        ))),
    }
}

fn attribute_schema(
    attributes: Option<Vec<(String, String, String)>>,
) -> PyResult<AttributeSchema> {
    let Some(attributes) = attributes else {
        return Ok(AttributeSchema::empty());
    };
    let mut defs = Vec::new();
    for (name, kind, scope) in attributes {
        let kind = match kind.as_str() {
            "categorical" => AttrKind::Categorical,
            "numeric" => AttrKind::Numeric,
            other => {
                return Err(value_err(format!(
                    "unknown attribute kind {other:?}; expected categorical or numeric"
                )))
            }
        };
        let scope = match scope.as_str() {
            "case" => AttrScope::Case,
            "event" => AttrScope::Event,
            other => {
                return Err(value_err(format!(
                    "unknown attribute scope {other:?}; expected case or event"
                )))
            }
        };
        defs.push(AttrDef::new(&name, kind, scope));
    }
    Ok(AttributeSchema::new(defs))
}

/// An event log: one trace per case, each with a sorted event sequence.
#[pyclass(name = "EventLog", module = "remtime_py")]
#[derive(Clone)]
struct PyEventLog {
    inner: EventLog,
    /// Cells that had to be coerced to numbers while parsing.
    coercions: usize,
}

#[pymethods]
impl PyEventLog {
    /// Parses a CSV event log. `attributes` is an optional list of
    /// `(name, kind, scope)` triples with kind `categorical`/`numeric`
    /// and scope `case`/`event`.
    #[staticmethod]
    #[pyo3(signature = (
        path,
        case_id = "case_id",
        activity = "activity",
        timestamp = "timestamp",
        timestamp_format = DEFAULT_TIMESTAMP_FORMAT,
        attributes = None,
    ))]
    fn read_csv(
        path: PathBuf,
        case_id: &str,
        activity: &str,
        timestamp: &str,
        timestamp_format: &str,
        attributes: Option<Vec<(String, String, String)>>,
    ) -> PyResult<Self> {
        let mapping = ColumnMapping::new(case_id, activity, timestamp, timestamp_format);
        let schema = attribute_schema(attributes)?;
        let file = std::fs::File::open(&path)
            .map_err(|e| value_err(format!("cannot open {}: {e}", path.display())))?;
        let parsed =
            parse_event_log(std::io::BufReader::new(file), &mapping, &schema).map_err(value_err)?;
        Ok(PyEventLog {
            inner: parsed.log,
            coercions: parsed.numeric_coercions as usize,
        })
    }

    /// Generates a synthetic log. `patterns` is a list of
    /// `(activities, weight, gaps)` triples; `gaps` may be `None` to use
    /// `gap_secs` between every pair of events.
    #[staticmethod]
    #[pyo3(signature = (
        n_cases,
        patterns,
        gap_secs = 3600.0,
        gap_noise = 0.0,
        case_interval_secs = 600.0,
        seed = 0,
    ))]
    fn synthesize(
        n_cases: usize,
        patterns: Vec<(Vec<String>, f64, Option<Vec<f64>>)>,
        gap_secs: f64,
        gap_noise: f64,
        case_interval_secs: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let patterns = patterns
            .into_iter()
            .map(|(activities, weight, gaps)| {
                let refs: Vec<&str> = activities.iter().map(String::as_str).collect();
                match gaps {
                    Some(gaps) => SynthPattern::with_gaps(&refs, weight, &gaps),
                    None => SynthPattern::new(&refs, weight),
                }
            })
            .collect();
        let config = SynthConfig {
            n_cases,
            patterns,
            gap_secs,
            gap_noise,
            case_interval_secs,
            seed,
            ..SynthConfig::default()
        };
        let log = generate_log(&config).map_err(value_err)?;
        Ok(PyEventLog {
            inner: log,
            coercions: 0,
        })
    }

    #[getter]
    fn n_cases(&self) -> usize {
        self.inner.traces.len()
    }

    #[getter]
    fn n_events(&self) -> usize {
        self.inner.traces.iter().map(|t| t.events.len()).sum()
    }

    #[getter]
    fn numeric_coercions(&self) -> usize {
        self.coercions
    }

    #[getter]
    fn mean_case_duration_secs(&self) -> f64 {
        self.inner.mean_case_duration_secs()
    }

    fn case_ids(&self) -> Vec<String> {
        self.inner
            .traces
            .iter()
            .map(|t| t.case_id.clone())
            .collect()
    }

    /// Log-level descriptive statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let stats = log_stats(&self.inner).map_err(value_err)?;
        let dict = PyDict::new_bound(py);
        dict.set_item("n_cases", stats.n_cases)?;
        dict.set_item("distinct_trace_ratio", stats.distinct_trace_ratio)?;
        dict.set_item("n_event_classes", stats.n_event_classes)?;
        dict.set_item("mean_distinct_event_ratio", stats.mean_distinct_event_ratio)?;
        dict.set_item("mean_case_length", stats.mean_case_length)?;
        dict.set_item("cv_case_length", stats.cv_case_length)?;
        dict.set_item("mean_case_duration_days", stats.mean_case_duration_days)?;
        dict.set_item("cv_case_duration", stats.cv_case_duration)?;
        Ok(dict)
    }

    /// Returns a cleaned copy: incomplete cases dropped, derived time
    /// attributes added, rare categorical values collapsed, constant
    /// columns removed.
    #[pyo3(signature = (incomplete_markers = None, rare_case_threshold = 10))]
    fn preprocess(
        &self,
        incomplete_markers: Option<Vec<String>>,
        rare_case_threshold: usize,
    ) -> Self {
        let config = PreprocessConfig {
            incomplete_markers: incomplete_markers.unwrap_or_default(),
            rare_case_threshold,
        };
        PyEventLog {
            inner: preprocess(&self.inner, &config),
            coercions: self.coercions,
        }
    }

    /// Temporal split: the oldest `ceil(train_ratio * n_cases)` cases by
    /// start time go to the first returned log, the rest to the second.
    #[pyo3(signature = (train_ratio = 0.8))]
    fn split(&self, train_ratio: f64) -> PyResult<(Self, Self)> {
        let mut warnings = Vec::new();
        let spec = temporal_split(&self.inner, train_ratio, &mut warnings).map_err(value_err)?;
        let (train, test) = split_log(&self.inner, &spec);
        Ok((
            PyEventLog {
                inner: train,
                coercions: 0,
            },
            PyEventLog {
                inner: test,
                coercions: 0,
            },
        ))
    }

    #[pyo3(signature = (
        path,
        case_id = "case_id",
        activity = "activity",
        timestamp = "timestamp",
        timestamp_format = DEFAULT_TIMESTAMP_FORMAT,
    ))]
    fn write_csv(
        &self,
        path: PathBuf,
        case_id: &str,
        activity: &str,
        timestamp: &str,
        timestamp_format: &str,
    ) -> PyResult<()> {
        let mapping = ColumnMapping::new(case_id, activity, timestamp, timestamp_format);
        let file = std::fs::File::create(&path)
            .map_err(|e| value_err(format!("cannot create {}: {e}", path.display())))?;
        write_csv(&self.inner, file, &mapping).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.traces.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "EventLog(n_cases={}, n_events={})",
            self.n_cases(),
            self.n_events()
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn build_descriptor(
    predictor: &str,
    bucketing: Option<&str>,
    encoding: Option<&str>,
    seed: u64,
    max_prefix: usize,
    name: Option<&str>,
    n_estimators: Option<usize>,
    learning_rate: Option<f64>,
    subsample: Option<f64>,
    colsample: Option<f64>,
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
    cluster_k: Option<usize>,
    min_bucket_size: Option<usize>,
    abstraction: Option<&str>,
    horizon: Option<usize>,
    statistic: Option<&str>,
    extra_aggregates: Option<bool>,
) -> PyResult<MethodDescriptor> {
    let mut params = MethodParams {
        max_prefix,
        ..MethodParams::default()
    };
    let mut gbt = GbtParams::default();
    if let Some(v) = n_estimators {
        gbt.n_estimators = v;
    }
    if let Some(v) = learning_rate {
        gbt.learning_rate = v;
    }
    if let Some(v) = subsample {
        gbt.subsample = v;
    }
    if let Some(v) = colsample {
        gbt.colsample = v;
    }
    if let Some(v) = max_depth {
        gbt.max_depth = v;
    }
    if let Some(v) = min_leaf {
        gbt.min_leaf = v;
    }
    params.gbt = gbt;
    if let Some(v) = cluster_k {
        params.cluster_k = v;
    }
    if let Some(v) = min_bucket_size {
        params.min_bucket_size = v;
    }
    if let Some(v) = abstraction {
        params.abstraction = parse_abstraction(v)?;
    }
    params.horizon = horizon;
    if let Some(v) = statistic {
        params.statistic = parse_statistic(v)?;
    }
    if let Some(v) = extra_aggregates {
        params.extra_aggregates = v;
    }

    let descriptor = match predictor {
        "gbt" => {
            let (Some(bucketing), Some(encoding)) = (bucketing, encoding) else {
                return Err(value_err("gbt needs both bucketing and encoding"));
            };
            MethodDescriptor::gbt(
                parse_bucketing(bucketing)?,
                parse_encoding(encoding)?,
                params,
                seed,
            )
        }
        "transition_system" => MethodDescriptor::transition_system(params, seed),
        "mean_baseline" => MethodDescriptor::mean_baseline(seed),
        other => {
            return Err(value_err(format!(
                "unknown predictor {other:?}; expected gbt, transition_system or mean_baseline"
            )))
        }
    };
    Ok(match name {
        Some(name) => descriptor.with_name(name),
        None => descriptor,
    })
}

fn params_dict<'py>(py: Python<'py>, params: &MethodParams) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new_bound(py);
    dict.set_item("n_estimators", params.gbt.n_estimators)?;
    dict.set_item("learning_rate", params.gbt.learning_rate)?;
    dict.set_item("subsample", params.gbt.subsample)?;
    dict.set_item("colsample", params.gbt.colsample)?;
    dict.set_item("max_depth", params.gbt.max_depth)?;
    dict.set_item("min_leaf", params.gbt.min_leaf)?;
    dict.set_item("cluster_k", params.cluster_k)?;
    dict.set_item("min_bucket_size", params.min_bucket_size)?;
    dict.set_item("abstraction", params.abstraction.name())?;
    dict.set_item("horizon", params.horizon)?;
    dict.set_item("statistic", params.statistic.name())?;
    dict.set_item("max_prefix", params.max_prefix)?;
    dict.set_item("extra_aggregates", params.extra_aggregates)?;
    Ok(dict)
}

/// A trained remaining-time model bound to its bucketing, encodings and
/// training fingerprint.
#[pyclass(name = "Model", module = "remtime_py")]
struct PyModel {
    inner: ModelBundle,
    warnings: Vec<String>,
}

#[pymethods]
impl PyModel {
    /// Fits one method on the given log. `predictor` is `gbt`,
    /// `transition_system` or `mean_baseline`; boosted trees additionally
    /// need `bucketing` and `encoding`. Remaining keywords override the
    /// stock hyperparameters.
    #[staticmethod]
    #[pyo3(signature = (
        log,
        predictor = "gbt",
        bucketing = None,
        encoding = None,
        seed = 0,
        max_prefix = 20,
        name = None,
        n_estimators = None,
        learning_rate = None,
        subsample = None,
        colsample = None,
        max_depth = None,
        min_leaf = None,
        cluster_k = None,
        min_bucket_size = None,
        abstraction = None,
        horizon = None,
        statistic = None,
        extra_aggregates = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        log: &PyEventLog,
        predictor: &str,
        bucketing: Option<&str>,
        encoding: Option<&str>,
        seed: u64,
        max_prefix: usize,
        name: Option<&str>,
        n_estimators: Option<usize>,
        learning_rate: Option<f64>,
        subsample: Option<f64>,
        colsample: Option<f64>,
        max_depth: Option<usize>,
        min_leaf: Option<usize>,
        cluster_k: Option<usize>,
        min_bucket_size: Option<usize>,
        abstraction: Option<&str>,
        horizon: Option<usize>,
        statistic: Option<&str>,
        extra_aggregates: Option<bool>,
    ) -> PyResult<Self> {
        let descriptor = build_descriptor(
            predictor,
            bucketing,
            encoding,
            seed,
            max_prefix,
            name,
            n_estimators,
            learning_rate,
            subsample,
            colsample,
            max_depth,
            min_leaf,
            cluster_k,
            min_bucket_size,
            abstraction,
            horizon,
            statistic,
            extra_aggregates,
        )?;
        let prefixes = extract_prefix_log(&log.inner, max_prefix);
        let mut warnings = Vec::new();
        let bundle = fit_method(&prefixes, &log.inner.schema, &descriptor, &mut warnings)
            .map_err(value_err)?;
        Ok(PyModel {
            inner: bundle,
            warnings,
        })
    }

    /// Cross-validated search over the stock hyperparameter grid, then a
    /// refit on the full log with the winner. Returns `(model, cv_mae)`.
    #[staticmethod]
    #[pyo3(signature = (
        log,
        predictor = "gbt",
        bucketing = None,
        encoding = None,
        folds = 5,
        seed = 0,
        max_prefix = 20,
    ))]
    fn tune(
        log: &PyEventLog,
        predictor: &str,
        bucketing: Option<&str>,
        encoding: Option<&str>,
        folds: usize,
        seed: u64,
        max_prefix: usize,
    ) -> PyResult<(Self, f64)> {
        let descriptor = build_descriptor(
            predictor, bucketing, encoding, seed, max_prefix, None, None, None, None, None, None,
            None, None, None, None, None, None, None,
        )?;
        let prefixes = extract_prefix_log(&log.inner, max_prefix);
        let grid = default_grid(&descriptor);
        let mut warnings = Vec::new();
        let outcome = grid_search(
            &prefixes,
            &log.inner.schema,
            &descriptor,
            &grid,
            folds,
            seed,
            None,
            &mut warnings,
        )
        .map_err(value_err)?;
        let tuned = MethodDescriptor {
            params: outcome.best_params.clone(),
            ..descriptor
        };
        let bundle =
            fit_method(&prefixes, &log.inner.schema, &tuned, &mut warnings).map_err(value_err)?;
        Ok((
            PyModel {
                inner: bundle,
                warnings,
            },
            outcome.best_mae,
        ))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.descriptor.name.clone()
    }

    #[getter]
    fn predictor(&self) -> &'static str {
        match self.inner.descriptor.predictor {
            PredictorKind::Gbt => "gbt",
            PredictorKind::TransitionSystem => "transition_system",
            PredictorKind::MeanBaseline => "mean_baseline",
        }
    }

    /// SHA-256 over the sorted distinct case ids the model was fit on.
    #[getter]
    fn train_fingerprint(&self) -> String {
        self.inner.metadata.train_case_fingerprint.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    /// Hyperparameters of the fitted method as a dict.
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        params_dict(py, &self.inner.descriptor.params)
    }

    /// Predicts remaining seconds for one running case given its observed
    /// activities and epoch-second timestamps.
    fn predict_case(&self, activities: Vec<String>, timestamps: Vec<i64>) -> PyResult<f64> {
        if activities.is_empty() || activities.len() != timestamps.len() {
            return Err(value_err(
                "activities and timestamps must be equally long and nonempty",
            ));
        }
        let events = activities
            .into_iter()
            .zip(&timestamps)
            .map(|(activity, &timestamp)| Event {
                activity,
                timestamp,
                attrs: BTreeMap::new(),
            })
            .collect::<Vec<_>>();
        let k = events.len();
        let trace = Arc::new(Trace {
            case_id: "query".into(),
            case_attrs: BTreeMap::new(),
            events,
        });
        self.inner
            .predict(&LabeledPrefix::new(trace, k))
            .map_err(value_err)
    }

    /// Predicts every prefix of every case in the log. Returns a list of
    /// `(case_id, k, predicted_seconds, actual_seconds)` tuples.
    #[pyo3(signature = (log, max_prefix = 20))]
    fn predict_log(
        &self,
        log: &PyEventLog,
        max_prefix: usize,
    ) -> PyResult<Vec<(String, usize, f64, f64)>> {
        let prefixes = extract_prefix_log(&log.inner, max_prefix);
        let mut out = Vec::with_capacity(prefixes.len());
        for p in &prefixes {
            let predicted = self.inner.predict(p).map_err(value_err)?;
            out.push((
                p.case_id().to_string(),
                p.k(),
                predicted,
                p.remaining_seconds(),
            ));
        }
        Ok(out)
    }

    /// Earliness curve and weighted summary on a held-out log. The
    /// normalized MAE divides by `mean_case_duration_secs` (defaults to
    /// the evaluated log's own mean).
    #[pyo3(signature = (log, max_prefix = 20, mean_case_duration_secs = None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        log: &PyEventLog,
        max_prefix: usize,
        mean_case_duration_secs: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let prefixes = extract_prefix_log(&log.inner, max_prefix);
        let curve = earliness_curve(&self.inner, &prefixes, max_prefix).map_err(value_err)?;
        let mean_duration =
            mean_case_duration_secs.unwrap_or_else(|| log.inner.mean_case_duration_secs());
        let summary = weighted_summary(&curve, mean_duration).map_err(value_err)?;
        let dict = PyDict::new_bound(py);
        dict.set_item("weighted_mae", summary.weighted_mae)?;
        dict.set_item("weighted_std", summary.weighted_std)?;
        dict.set_item("normalized_mae", summary.normalized_mae)?;
        let rows = PyList::empty_bound(py);
        for row in &curve {
            rows.append((row.k, row.n_prefixes, row.mae_seconds))?;
        }
        dict.set_item("curve", rows)?;
        Ok(dict)
    }

    /// Writes the bundle (descriptor, metadata, bucketer and per-bucket
    /// models) into a directory.
    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(&dir).map_err(value_err)
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let bundle = ModelBundle::load(&dir).map_err(value_err)?;
        Ok(PyModel {
            inner: bundle,
            warnings: Vec::new(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(name={:?}, predictor={:?})",
            self.inner.descriptor.name,
            self.predictor()
        )
    }
}

/// Friedman chi-squared over an `n_datasets x n_methods` matrix of
/// average-tie ranks. Returns `(statistic, degrees_of_freedom)`.
#[pyfunction]
fn friedman(ranks: Vec<Vec<f64>>) -> PyResult<(f64, usize)> {
    let result = friedman_test(&ranks).map_err(value_err)?;
    Ok((result.statistic, result.df))
}

/// Average-tie ranks of one observation vector, lower value = better rank.
#[pyfunction]
fn average_ranks(values: Vec<f64>) -> Vec<f64> {
    rank_average(&values)
}

#[pymodule]
fn remtime_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventLog>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(friedman, m)?)?;
    m.add_function(wrap_pyfunction!(average_ranks, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
