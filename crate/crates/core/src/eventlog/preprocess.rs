use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::{AttrDef, AttrKind, AttrScope, AttrValue, EventLog};

/// Reserved names of the derived numeric event attributes added by
/// [`preprocess`]. Columns with these names in the input are overwritten.
pub const DERIVED_ATTRS: [&str; 4] = ["weekday", "hour", "t_prev", "t_start"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Cases containing any of these activities are dropped whole.
    #[serde(default)]
    pub incomplete_markers: Vec<String>,
    /// A categorical value seen in fewer than this many distinct cases is
    /// replaced by the literal `other`.
    #[serde(default = "default_rare_case_threshold")]
    pub rare_case_threshold: usize,
}

fn default_rare_case_threshold() -> usize {
    10
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            incomplete_markers: Vec::new(),
            rare_case_threshold: 10,
        }
    }
}

/// Cleans a log for training. In order: cases marked incomplete are
/// dropped; the derived event attributes `weekday` (0 = Monday), `hour`,
/// `t_prev` (seconds since the previous event, 0 for the first) and
/// `t_start` (seconds since the case start) are recomputed from the
/// timestamps; rare categorical values become `other`; attributes with a
/// single observed value across the whole log are dropped. The activity
/// field is never rewritten. Applying the function twice gives the same
/// log as applying it once.
pub fn preprocess(log: &EventLog, config: &PreprocessConfig) -> EventLog {
    let markers: BTreeSet<&str> = config
        .incomplete_markers
        .iter()
        .map(|s| s.as_str())
        .collect();
    let mut traces: Vec<_> = log
        .traces
        .iter()
        .filter(|t| !t.activities().any(|a| markers.contains(a)))
        .cloned()
        .collect();

    let mut schema = log.schema.clone();
    schema
        .attrs
        .retain(|a| !DERIVED_ATTRS.contains(&a.name.as_str()));
    for name in DERIVED_ATTRS {
        schema
            .attrs
            .push(AttrDef::new(name, AttrKind::Numeric, AttrScope::Event));
    }
    for trace in &mut traces {
        for name in DERIVED_ATTRS {
            trace.case_attrs.remove(name);
        }
        let start = trace.events[0].timestamp;
        let mut prev = start;
        for event in &mut trace.events {
            let dt = chrono::DateTime::from_timestamp(event.timestamp, 0)
                .expect("timestamp in range")
                .naive_utc();
            let weekday = dt.weekday().num_days_from_monday() as f64;
            event
                .attrs
                .insert("weekday".into(), AttrValue::Num(weekday));
            event
                .attrs
                .insert("hour".into(), AttrValue::Num(dt.hour() as f64));
            event.attrs.insert(
                "t_prev".into(),
                AttrValue::Num((event.timestamp - prev) as f64),
            );
            event.attrs.insert(
                "t_start".into(),
                AttrValue::Num((event.timestamp - start) as f64),
            );
            prev = event.timestamp;
        }
    }

    if traces.is_empty() {
        return EventLog { traces, schema };
    }

    // Rare value replacement over declared categorical attributes. A value
    // counts once per case it appears in.
    for def in schema
        .attrs
        .iter()
        .filter(|a| a.kind == AttrKind::Categorical)
    {
        let mut case_counts: BTreeMap<String, usize> = BTreeMap::new();
        for trace in &traces {
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            match def.scope {
                AttrScope::Case => {
                    if let Some(AttrValue::Cat(v)) = trace.case_attrs.get(&def.name) {
                        seen.insert(v);
                    }
                }
                AttrScope::Event => {
                    for event in &trace.events {
                        if let Some(AttrValue::Cat(v)) = event.attrs.get(&def.name) {
                            seen.insert(v);
                        }
                    }
                }
            }
            for v in seen {
                *case_counts.entry(v.to_string()).or_insert(0) += 1;
            }
        }
        let rare: BTreeSet<&String> = case_counts
            .iter()
            .filter(|(_, &n)| n < config.rare_case_threshold)
            .map(|(v, _)| v)
            .collect();
        if rare.is_empty() {
            continue;
        }
        let rewrite = |value: &mut AttrValue| {
            if let AttrValue::Cat(v) = value {
                if rare.contains(v) {
                    *value = AttrValue::Cat("other".into());
                }
            }
        };
        for trace in &mut traces {
            match def.scope {
                AttrScope::Case => {
                    if let Some(v) = trace.case_attrs.get_mut(&def.name) {
                        rewrite(v);
                    }
                }
                AttrScope::Event => {
                    for event in &mut trace.events {
                        if let Some(v) = event.attrs.get_mut(&def.name) {
                            rewrite(v);
                        }
                    }
                }
            }
        }
    }

    // Drop attributes with one observed value across the log. An absent
    // value counts as missing, which is distinct from any present value.
    let constant: Vec<String> = schema
        .attrs
        .iter()
        .filter(|def| {
            let mut values = traces.iter().flat_map(|trace| match def.scope {
                AttrScope::Case => vec![trace.case_attrs.get(&def.name)],
                AttrScope::Event => trace
                    .events
                    .iter()
                    .map(|e| e.attrs.get(&def.name))
                    .collect(),
            });
            let first = values
                .next()
                .flatten()
                .cloned()
                .unwrap_or(AttrValue::Missing);
            values.all(|v| v.cloned().unwrap_or(AttrValue::Missing) == first)
        })
        .map(|def| def.name.clone())
        .collect();
    schema.attrs.retain(|a| !constant.contains(&a.name));
    for trace in &mut traces {
        for name in &constant {
            trace.case_attrs.remove(name);
            for event in &mut trace.events {
                event.attrs.remove(name);
            }
        }
    }

    EventLog { traces, schema }
}
