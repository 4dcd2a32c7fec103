//! Fixed-width feature encodings of case prefixes.
//!
//! A [`FeatureSchema`] is fitted on training prefixes and frozen: it fixes
//! the column layout and the categorical vocabularies. Encoding is then a
//! pure function from prefix to vector. Categorical values expand to
//! one-hot blocks over the training vocabulary; a value unseen in training
//! maps to the all-zero block, an explicitly missing value maps to the
//! [`MISSING_TOKEN`] column when training saw missing values.
//!
//! Three encodings are provided. `last_state` keeps the case attributes
//! plus a snapshot of the latest event. `aggregation` keeps the case
//! attributes plus value counts and numeric sums over all visible events.
//! `index` concatenates one block per position up to a fixed length,
//! zero-padding short prefixes and ignoring events beyond the length.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{AttrDef, AttrKind, AttrScope, AttrValue, AttributeSchema, LabeledPrefix};

/// Vocabulary token standing in for an explicitly missing categorical value.
pub const MISSING_TOKEN: &str = "__missing__";

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("cannot fit a feature schema on an empty prefix set")]
    EmptyTrainingSet,
    #[error("index encoding needs a positive length")]
    BadIndexLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    LastState,
    Aggregation,
    Index,
}

impl EncodingKind {
    pub fn name(&self) -> &'static str {
        match self {
            EncodingKind::LastState => "last_state",
            EncodingKind::Aggregation => "aggregation",
            EncodingKind::Index => "index",
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            EncodingKind::LastState => "last",
            EncodingKind::Aggregation => "agg",
            EncodingKind::Index => "index",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EncodeOptions {
    /// Number of event positions for the index encoding. `None` uses the
    /// longest prefix seen in training.
    pub index_length: Option<usize>,
    /// Append min, max and mean columns per numeric series to the
    /// aggregation encoding.
    pub extra_aggregates: bool,
}

/// Frozen encoding layout: ordered columns plus everything needed to map a
/// prefix onto them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub encoding: EncodingKind,
    pub columns: Vec<String>,
    /// Case-scope attributes, declaration order.
    pub static_attrs: Vec<AttrDef>,
    /// Event-scope attributes, declaration order. The derived `t_prev` and
    /// `t_start` attributes are left out: the canonical time column of each
    /// encoding already carries that signal.
    pub dynamic_attrs: Vec<AttrDef>,
    /// Lexicographically sorted activity labels seen in training.
    pub activity_vocab: Vec<String>,
    /// Per-attribute categorical vocabularies, lexicographically sorted.
    pub vocabs: BTreeMap<String, Vec<String>>,
    pub index_length: Option<usize>,
    pub extra_aggregates: bool,
}

/// One encoded prefix. `values` is aligned with the schema columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Remaining seconds until case completion.
    pub label: f64,
    pub case_id: String,
    pub k: usize,
}

/// Pre-expansion view of a single cell in the symbolic row layout.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolicValue {
    Cat(String),
    Num(f64),
    Missing,
    /// Position beyond the end of the prefix (index encoding only).
    Pad,
}

/// Reserved derived names covered by the canonical time columns.
const RESERVED_TIME_ATTRS: [&str; 2] = ["t_prev", "t_start"];

pub fn fit_schema(
    prefixes: &[LabeledPrefix],
    encoding: EncodingKind,
    attr_schema: &AttributeSchema,
    options: &EncodeOptions,
) -> Result<FeatureSchema, EncodingError> {
    if prefixes.is_empty() {
        return Err(EncodingError::EmptyTrainingSet);
    }

    let static_attrs: Vec<AttrDef> = attr_schema.case_attrs().cloned().collect();
    let dynamic_attrs: Vec<AttrDef> = attr_schema
        .event_attrs()
        .filter(|a| !RESERVED_TIME_ATTRS.contains(&a.name.as_str()))
        .cloned()
        .collect();

    let mut activities: BTreeSet<String> = BTreeSet::new();
    for p in prefixes {
        for e in p.events() {
            activities.insert(e.activity.clone());
        }
    }
    let activity_vocab: Vec<String> = activities.into_iter().collect();

    let mut vocabs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for def in static_attrs
        .iter()
        .chain(dynamic_attrs.iter())
        .filter(|a| a.kind == AttrKind::Categorical)
    {
        let mut set: BTreeSet<String> = BTreeSet::new();
        let mut note = |v: Option<&AttrValue>| match v {
            Some(AttrValue::Cat(s)) => {
                set.insert(s.clone());
            }
            Some(AttrValue::Num(_)) => {}
            Some(AttrValue::Missing) | None => {
                set.insert(MISSING_TOKEN.to_string());
            }
        };
        for p in prefixes {
            match def.scope {
                AttrScope::Case => note(p.case_attrs().get(&def.name)),
                AttrScope::Event => {
                    for e in p.events() {
                        note(e.attrs.get(&def.name));
                    }
                }
            }
        }
        vocabs.insert(def.name.clone(), set.into_iter().collect());
    }

    let index_length = match encoding {
        EncodingKind::Index => {
            let n = options
                .index_length
                .unwrap_or_else(|| prefixes.iter().map(|p| p.k()).max().unwrap_or(0));
            if n == 0 {
                return Err(EncodingError::BadIndexLength);
            }
            Some(n)
        }
        _ => None,
    };

    let mut schema = FeatureSchema {
        encoding,
        columns: Vec::new(),
        static_attrs,
        dynamic_attrs,
        activity_vocab,
        vocabs,
        index_length,
        extra_aggregates: options.extra_aggregates && encoding == EncodingKind::Aggregation,
    };
    schema.columns = build_columns(&schema);
    Ok(schema)
}

fn one_hot_columns(out: &mut Vec<String>, base: &str, vocab: &[String]) {
    for v in vocab {
        out.push(format!("{base}={v}"));
    }
}

fn build_columns(schema: &FeatureSchema) -> Vec<String> {
    let mut cols = Vec::new();
    for def in &schema.static_attrs {
        match def.kind {
            AttrKind::Numeric => cols.push(def.name.clone()),
            AttrKind::Categorical => {
                one_hot_columns(&mut cols, &def.name, &schema.vocabs[&def.name])
            }
        }
    }
    match schema.encoding {
        EncodingKind::LastState => {
            one_hot_columns(&mut cols, "Activity_last", &schema.activity_vocab);
            cols.push("t_start_last".into());
            for def in &schema.dynamic_attrs {
                let base = format!("{}_last", def.name);
                match def.kind {
                    AttrKind::Numeric => cols.push(base),
                    AttrKind::Categorical => {
                        one_hot_columns(&mut cols, &base, &schema.vocabs[&def.name])
                    }
                }
            }
        }
        EncodingKind::Aggregation => {
            one_hot_columns(&mut cols, "Activity", &schema.activity_vocab);
            for def in &schema.dynamic_attrs {
                if def.kind == AttrKind::Categorical {
                    one_hot_columns(&mut cols, &def.name, &schema.vocabs[&def.name]);
                }
            }
            cols.push("sum_Time".into());
            for def in &schema.dynamic_attrs {
                if def.kind == AttrKind::Numeric {
                    cols.push(format!("sum_{}", def.name));
                }
            }
            if schema.extra_aggregates {
                let mut series = vec!["Time".to_string()];
                series.extend(
                    schema
                        .dynamic_attrs
                        .iter()
                        .filter(|d| d.kind == AttrKind::Numeric)
                        .map(|d| d.name.clone()),
                );
                for name in series {
                    cols.push(format!("min_{name}"));
                    cols.push(format!("max_{name}"));
                    cols.push(format!("mean_{name}"));
                }
            }
        }
        EncodingKind::Index => {
            let n = schema.index_length.expect("index length fitted");
            for i in 1..=n {
                one_hot_columns(&mut cols, &format!("Activity_{i}"), &schema.activity_vocab);
                cols.push(format!("t_start_{i}"));
                for def in &schema.dynamic_attrs {
                    let base = format!("{}_{i}", def.name);
                    match def.kind {
                        AttrKind::Numeric => cols.push(base),
                        AttrKind::Categorical => {
                            one_hot_columns(&mut cols, &base, &schema.vocabs[&def.name])
                        }
                    }
                }
            }
        }
    }
    cols
}

impl FeatureSchema {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

enum Cell<'a> {
    Num(f64),
    /// Categorical cell expanding over a vocabulary. `None` value means
    /// missing, `pad` suppresses even the missing token.
    Cat {
        vocab: &'a [String],
        value: Option<&'a str>,
        pad: bool,
    },
}

fn push_cell(values: &mut Vec<f64>, cell: Cell) {
    match cell {
        Cell::Num(x) => values.push(x),
        Cell::Cat { vocab, value, pad } => {
            let token = if pad {
                None
            } else {
                value.or(Some(MISSING_TOKEN))
            };
            let hit = token.and_then(|t| vocab.iter().position(|v| v == t));
            let start = values.len();
            values.resize(start + vocab.len(), 0.0);
            if let Some(i) = hit {
                values[start + i] = 1.0;
            }
        }
    }
}

fn cat_value(value: Option<&AttrValue>) -> Option<&str> {
    match value {
        Some(AttrValue::Cat(s)) => Some(s),
        _ => None,
    }
}

fn num_value(value: Option<&AttrValue>) -> f64 {
    match value {
        Some(AttrValue::Num(x)) => *x,
        _ => 0.0,
    }
}

fn push_static(values: &mut Vec<f64>, prefix: &LabeledPrefix, schema: &FeatureSchema) {
    for def in &schema.static_attrs {
        let raw = prefix.case_attrs().get(&def.name);
        match def.kind {
            AttrKind::Numeric => push_cell(values, Cell::Num(num_value(raw))),
            AttrKind::Categorical => push_cell(
                values,
                Cell::Cat {
                    vocab: &schema.vocabs[&def.name],
                    value: cat_value(raw),
                    pad: false,
                },
            ),
        }
    }
}

pub fn encode_last_state(prefix: &LabeledPrefix, schema: &FeatureSchema) -> FeatureVector {
    let mut values = Vec::with_capacity(schema.width());
    push_static(&mut values, prefix, schema);
    let last = &prefix.events()[prefix.k() - 1];
    push_cell(
        &mut values,
        Cell::Cat {
            vocab: &schema.activity_vocab,
            value: Some(&last.activity),
            pad: false,
        },
    );
    push_cell(&mut values, Cell::Num(prefix.elapsed_seconds()));
    for def in &schema.dynamic_attrs {
        let raw = last.attrs.get(&def.name);
        match def.kind {
            AttrKind::Numeric => push_cell(&mut values, Cell::Num(num_value(raw))),
            AttrKind::Categorical => push_cell(
                &mut values,
                Cell::Cat {
                    vocab: &schema.vocabs[&def.name],
                    value: cat_value(raw),
                    pad: false,
                },
            ),
        }
    }
    finish(values, prefix, schema)
}

pub fn encode_aggregation(prefix: &LabeledPrefix, schema: &FeatureSchema) -> FeatureVector {
    let mut values = Vec::with_capacity(schema.width());
    push_static(&mut values, prefix, schema);

    let count_block =
        |values: &mut Vec<f64>,
         vocab: &[String],
         get: &dyn Fn(&crate::eventlog::Event) -> Option<String>| {
            let start = values.len();
            values.resize(start + vocab.len(), 0.0);
            for e in prefix.events() {
                if let Some(token) = get(e) {
                    if let Some(i) = vocab.iter().position(|v| *v == token) {
                        values[start + i] += 1.0;
                    }
                }
            }
        };

    count_block(&mut values, &schema.activity_vocab, &|e| {
        Some(e.activity.clone())
    });
    for def in &schema.dynamic_attrs {
        if def.kind == AttrKind::Categorical {
            let name = def.name.clone();
            count_block(
                &mut values,
                &schema.vocabs[&def.name],
                &move |e| match e.attrs.get(&name) {
                    Some(AttrValue::Cat(s)) => Some(s.clone()),
                    _ => Some(MISSING_TOKEN.to_string()),
                },
            );
        }
    }

    values.push(prefix.elapsed_seconds());
    for def in &schema.dynamic_attrs {
        if def.kind == AttrKind::Numeric {
            let sum: f64 = prefix
                .events()
                .iter()
                .map(|e| num_value(e.attrs.get(&def.name)))
                .sum();
            values.push(sum);
        }
    }

    if schema.extra_aggregates {
        let k = prefix.k() as f64;
        let gaps: Vec<f64> = (1..=prefix.k()).map(|i| prefix.gap_at(i)).collect();
        let mut push_stats = |series: &[f64]| {
            let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            values.push(min);
            values.push(max);
            values.push(series.iter().sum::<f64>() / k);
        };
        push_stats(&gaps);
        for def in &schema.dynamic_attrs {
            if def.kind == AttrKind::Numeric {
                let series: Vec<f64> = prefix
                    .events()
                    .iter()
                    .map(|e| num_value(e.attrs.get(&def.name)))
                    .collect();
                push_stats(&series);
            }
        }
    }
    finish(values, prefix, schema)
}

pub fn encode_index(prefix: &LabeledPrefix, schema: &FeatureSchema) -> FeatureVector {
    let n = schema.index_length.expect("index length fitted");
    let mut values = Vec::with_capacity(schema.width());
    push_static(&mut values, prefix, schema);
    for i in 1..=n {
        let event = prefix.events().get(i - 1);
        push_cell(
            &mut values,
            Cell::Cat {
                vocab: &schema.activity_vocab,
                value: event.map(|e| e.activity.as_str()),
                pad: event.is_none(),
            },
        );
        push_cell(
            &mut values,
            Cell::Num(if event.is_some() {
                prefix.elapsed_at(i)
            } else {
                0.0
            }),
        );
        for def in &schema.dynamic_attrs {
            let raw = event.and_then(|e| e.attrs.get(&def.name));
            match def.kind {
                AttrKind::Numeric => push_cell(&mut values, Cell::Num(num_value(raw))),
                AttrKind::Categorical => push_cell(
                    &mut values,
                    Cell::Cat {
                        vocab: &schema.vocabs[&def.name],
                        value: cat_value(raw),
                        pad: event.is_none(),
                    },
                ),
            }
        }
    }
    finish(values, prefix, schema)
}

fn finish(values: Vec<f64>, prefix: &LabeledPrefix, schema: &FeatureSchema) -> FeatureVector {
    debug_assert_eq!(values.len(), schema.width());
    FeatureVector {
        values,
        label: prefix.remaining_seconds(),
        case_id: prefix.case_id().to_string(),
        k: prefix.k(),
    }
}

pub fn encode(prefix: &LabeledPrefix, schema: &FeatureSchema) -> FeatureVector {
    match schema.encoding {
        EncodingKind::LastState => encode_last_state(prefix, schema),
        EncodingKind::Aggregation => encode_aggregation(prefix, schema),
        EncodingKind::Index => encode_index(prefix, schema),
    }
}

/// Pre-expansion view of the `last_state` or `index` row for a prefix:
/// one `(column base, value)` pair per cell, categoricals unexpanded.
/// Aggregation rows are already numeric, so they have no symbolic form.
pub fn symbolic_row(
    prefix: &LabeledPrefix,
    schema: &FeatureSchema,
) -> Vec<(String, SymbolicValue)> {
    let mut row = Vec::new();
    let push_attr = |row: &mut Vec<(String, SymbolicValue)>,
                     base: String,
                     def: &AttrDef,
                     raw: Option<&AttrValue>,
                     padded: bool| {
        let value = if padded {
            SymbolicValue::Pad
        } else {
            match (def.kind, raw) {
                (AttrKind::Categorical, Some(AttrValue::Cat(s))) => SymbolicValue::Cat(s.clone()),
                (AttrKind::Categorical, _) => SymbolicValue::Missing,
                (AttrKind::Numeric, raw) => SymbolicValue::Num(num_value(raw)),
            }
        };
        row.push((base, value));
    };

    for def in &schema.static_attrs {
        push_attr(
            &mut row,
            def.name.clone(),
            def,
            prefix.case_attrs().get(&def.name),
            false,
        );
    }
    match schema.encoding {
        EncodingKind::LastState => {
            let last = &prefix.events()[prefix.k() - 1];
            row.push((
                "Activity_last".into(),
                SymbolicValue::Cat(last.activity.clone()),
            ));
            row.push((
                "t_start_last".into(),
                SymbolicValue::Num(prefix.elapsed_seconds()),
            ));
            for def in &schema.dynamic_attrs {
                push_attr(
                    &mut row,
                    format!("{}_last", def.name),
                    def,
                    last.attrs.get(&def.name),
                    false,
                );
            }
        }
        EncodingKind::Index => {
            let n = schema.index_length.expect("index length fitted");
            for i in 1..=n {
                let event = prefix.events().get(i - 1);
                row.push((
                    format!("Activity_{i}"),
                    match event {
                        Some(e) => SymbolicValue::Cat(e.activity.clone()),
                        None => SymbolicValue::Pad,
                    },
                ));
                row.push((
                    format!("t_start_{i}"),
                    SymbolicValue::Num(if event.is_some() {
                        prefix.elapsed_at(i)
                    } else {
                        0.0
                    }),
                ));
                for def in &schema.dynamic_attrs {
                    push_attr(
                        &mut row,
                        format!("{}_{i}", def.name),
                        def,
                        event.and_then(|e| e.attrs.get(&def.name)),
                        event.is_none(),
                    );
                }
            }
        }
        EncodingKind::Aggregation => {}
    }
    row
}
