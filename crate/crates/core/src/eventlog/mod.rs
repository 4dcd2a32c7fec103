//! Event log model: typed traces of timestamped activity events, prefix
//! extraction and per-log statistics.
//!
//! A log is a set of completed cases. Each case (trace) is an ordered
//! sequence of events carrying an activity label, a timestamp with second
//! precision and optional categorical or numeric attributes. Attributes are
//! either static (case scope, one value for the whole case) or dynamic
//! (event scope, one value per event).

mod parse;
mod preprocess;
mod stats;

pub use parse::{parse_event_log, write_csv, ColumnMapping, ParsedLog, DEFAULT_TIMESTAMP_FORMAT};
pub use preprocess::{preprocess, PreprocessConfig, DERIVED_ATTRS};
pub use stats::{log_stats, LogStats};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds per day, used when reporting durations in days.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("missing mapped column `{column}` in CSV header")]
    MissingColumn { column: String },
    #[error("row {row}: cannot parse timestamp `{value}` with format `{format}`")]
    BadTimestamp {
        row: u64,
        value: String,
        format: String,
    },
    #[error("row {row}: empty {field}")]
    EmptyField { row: u64, field: &'static str },
    #[error("row {row}: {source}")]
    Csv { row: u64, source: csv::Error },
    #[error("duplicate case id `{case_id}`")]
    DuplicateCase { case_id: String },
    #[error("no cases")]
    EmptyLog,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value of a case or event attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Cat(String),
    Num(f64),
    Missing,
}

impl AttrValue {
    pub fn as_cat(&self) -> Option<&str> {
        match self {
            AttrValue::Cat(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Categorical,
    Numeric,
}

/// Whether an attribute belongs to the case (static) or to each event (dynamic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrScope {
    Case,
    Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrDef {
    pub name: String,
    pub kind: AttrKind,
    pub scope: AttrScope,
}

impl AttrDef {
    pub fn new(name: &str, kind: AttrKind, scope: AttrScope) -> Self {
        AttrDef {
            name: name.to_string(),
            kind,
            scope,
        }
    }
}

/// Declared attributes of a log, in declaration order. The mandatory
/// case-id, activity and timestamp columns are not attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attrs: Vec<AttrDef>,
}

impl AttributeSchema {
    pub fn new(attrs: Vec<AttrDef>) -> Self {
        AttributeSchema { attrs }
    }

    pub fn empty() -> Self {
        AttributeSchema { attrs: Vec::new() }
    }

    pub fn case_attrs(&self) -> impl Iterator<Item = &AttrDef> {
        self.attrs.iter().filter(|a| a.scope == AttrScope::Case)
    }

    pub fn event_attrs(&self) -> impl Iterator<Item = &AttrDef> {
        self.attrs.iter().filter(|a| a.scope == AttrScope::Event)
    }

    pub fn get(&self, name: &str) -> Option<&AttrDef> {
        self.attrs.iter().find(|a| a.name == name)
    }
}

/// One executed activity. `timestamp` is in whole seconds since the Unix
/// epoch (completion time). Case-scope attributes live on [`Trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub activity: String,
    pub timestamp: i64,
    pub attrs: BTreeMap<String, AttrValue>,
}

/// All events of one case, sorted by timestamp (input order on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub case_attrs: BTreeMap<String, AttrValue>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Completion timestamp of the first event.
    pub fn start(&self) -> i64 {
        self.events[0].timestamp
    }

    /// Case duration in seconds (last event minus first event).
    pub fn duration_secs(&self) -> f64 {
        (self.events[self.events.len() - 1].timestamp - self.events[0].timestamp) as f64
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.activity.as_str())
    }
}

/// A parsed log: traces sorted by case id, case ids unique.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub schema: AttributeSchema,
}

impl EventLog {
    /// Builds a log from raw traces, restoring the invariants: events are
    /// stable-sorted by timestamp within each case, empty traces are
    /// rejected implicitly by `Trace::start`, and traces are ordered by
    /// case id. Duplicate case ids are an error.
    pub fn from_traces(
        mut traces: Vec<Trace>,
        schema: AttributeSchema,
    ) -> Result<Self, EventLogError> {
        for trace in &mut traces {
            trace.events.sort_by_key(|e| e.timestamp);
        }
        traces.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        for pair in traces.windows(2) {
            if pair[0].case_id == pair[1].case_id {
                return Err(EventLogError::DuplicateCase {
                    case_id: pair[0].case_id.clone(),
                });
            }
        }
        Ok(EventLog { traces, schema })
    }

    pub fn n_cases(&self) -> usize {
        self.traces.len()
    }

    pub fn trace(&self, case_id: &str) -> Option<&Trace> {
        self.traces
            .binary_search_by(|t| t.case_id.as_str().cmp(case_id))
            .ok()
            .map(|i| &self.traces[i])
    }

    /// Mean case duration in seconds over all traces; 0 for an empty log.
    pub fn mean_case_duration_secs(&self) -> f64 {
        if self.traces.is_empty() {
            return 0.0;
        }
        self.traces.iter().map(|t| t.duration_secs()).sum::<f64>() / self.traces.len() as f64
    }
}

/// The first `k` events of a case together with its remaining-time label.
///
/// The label is the time from the `k`-th event to the last event of the
/// full case, in seconds, computed from the original timestamps. Prefixes
/// share the underlying trace, so cloning is cheap.
#[derive(Debug, Clone)]
pub struct LabeledPrefix {
    trace: Arc<Trace>,
    k: usize,
    remaining_seconds: f64,
    elapsed_seconds: f64,
}

impl LabeledPrefix {
    /// Head-to-`k` view of a case. `k` may equal the case length, giving a
    /// completed view with zero remaining time; [`extract_prefix_log`]
    /// never emits those, but encoders accept them.
    pub fn new(trace: Arc<Trace>, k: usize) -> Self {
        debug_assert!(k >= 1 && k <= trace.events.len());
        let start = trace.events[0].timestamp;
        let at_k = trace.events[k - 1].timestamp;
        let end = trace.events[trace.events.len() - 1].timestamp;
        LabeledPrefix {
            trace,
            k,
            remaining_seconds: (end - at_k) as f64,
            elapsed_seconds: (at_k - start) as f64,
        }
    }

    pub fn case_id(&self) -> &str {
        &self.trace.case_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The visible events, i.e. the first `k` events of the case.
    pub fn events(&self) -> &[Event] {
        &self.trace.events[..self.k]
    }

    pub fn case_attrs(&self) -> &BTreeMap<String, AttrValue> {
        &self.trace.case_attrs
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events().iter().map(|e| e.activity.as_str())
    }

    pub fn remaining_seconds(&self) -> f64 {
        self.remaining_seconds
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.elapsed_seconds
    }

    /// Elapsed seconds from the case start to the event at `pos` (1-based).
    pub fn elapsed_at(&self, pos: usize) -> f64 {
        (self.trace.events[pos - 1].timestamp - self.trace.events[0].timestamp) as f64
    }

    /// Seconds between the event at `pos` (1-based) and its predecessor;
    /// 0 for the first event.
    pub fn gap_at(&self, pos: usize) -> f64 {
        if pos <= 1 {
            0.0
        } else {
            (self.trace.events[pos - 1].timestamp - self.trace.events[pos - 2].timestamp) as f64
        }
    }
}

/// Emits one labeled prefix per trace and length `k` in
/// `1..=min(len - 1, max_prefix)`. Completed work yields nothing: a
/// one-event trace has no prefixes. Output is ordered by case id, then `k`.
pub fn extract_prefix_log(log: &EventLog, max_prefix: usize) -> Vec<LabeledPrefix> {
    let mut out = Vec::new();
    for trace in &log.traces {
        if trace.events.len() < 2 {
            continue;
        }
        let arc = Arc::new(trace.clone());
        let upper = (trace.events.len() - 1).min(max_prefix);
        for k in 1..=upper {
            out.push(LabeledPrefix::new(Arc::clone(&arc), k));
        }
    }
    out
}
