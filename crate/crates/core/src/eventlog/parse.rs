use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDateTime;

use super::{
    AttrDef, AttrKind, AttrScope, AttrValue, AttributeSchema, Event, EventLog, EventLogError, Trace,
};

pub const DEFAULT_TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Names of the mandatory CSV columns and the timestamp format
/// (chrono strftime syntax).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    pub timestamp_format: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            case_id: "case_id".into(),
            activity: "activity".into(),
            timestamp: "timestamp".into(),
            timestamp_format: DEFAULT_TIMESTAMP_FORMAT.into(),
        }
    }
}

impl ColumnMapping {
    pub fn new(case_id: &str, activity: &str, timestamp: &str, format: &str) -> Self {
        ColumnMapping {
            case_id: case_id.into(),
            activity: activity.into(),
            timestamp: timestamp.into(),
            timestamp_format: format.into(),
        }
    }
}

/// Result of [`parse_event_log`]: the log plus a count of non-empty numeric
/// fields that did not parse and were coerced to missing.
#[derive(Debug)]
pub struct ParsedLog {
    pub log: EventLog,
    pub numeric_coercions: u64,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, EventLogError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| EventLogError::MissingColumn {
            column: name.to_string(),
        })
}

fn parse_attr_value(raw: &str, kind: AttrKind, coercions: &mut u64) -> AttrValue {
    if raw.is_empty() {
        return AttrValue::Missing;
    }
    match kind {
        AttrKind::Categorical => AttrValue::Cat(raw.to_string()),
        AttrKind::Numeric => match raw.parse::<f64>() {
            Ok(x) if x.is_finite() => AttrValue::Num(x),
            _ => {
                *coercions += 1;
                AttrValue::Missing
            }
        },
    }
}

/// Reads a CSV event stream into an [`EventLog`].
///
/// One row per event; rows of the same case may be interleaved with other
/// cases. Events are ordered by timestamp within each case, keeping input
/// order on ties. For a case-scope attribute the first row of the case
/// wins. Empty fields are missing values; a non-empty numeric field that
/// does not parse becomes missing and is counted, not fatal.
pub fn parse_event_log<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    schema: &AttributeSchema,
) -> Result<ParsedLog, EventLogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| EventLogError::Csv { row: 1, source: e })?
        .clone();

    let case_idx = column_index(&headers, &mapping.case_id)?;
    let activity_idx = column_index(&headers, &mapping.activity)?;
    let timestamp_idx = column_index(&headers, &mapping.timestamp)?;
    let attr_idx: Vec<(usize, &AttrDef)> = schema
        .attrs
        .iter()
        .map(|def| Ok((column_index(&headers, &def.name)?, def)))
        .collect::<Result<_, EventLogError>>()?;

    struct Builder {
        case_attrs: BTreeMap<String, AttrValue>,
        events: Vec<Event>,
    }
    let mut cases: BTreeMap<String, Builder> = BTreeMap::new();
    let mut coercions = 0u64;

    for (i, record) in rdr.records().enumerate() {
        let row = (i + 2) as u64;
        let record = record.map_err(|e| EventLogError::Csv { row, source: e })?;
        let field = |idx: usize| record.get(idx).unwrap_or("");

        let case_id = field(case_idx);
        if case_id.is_empty() {
            return Err(EventLogError::EmptyField {
                row,
                field: "case id",
            });
        }
        let activity = field(activity_idx);
        if activity.is_empty() {
            return Err(EventLogError::EmptyField {
                row,
                field: "activity",
            });
        }
        let ts_raw = field(timestamp_idx);
        let timestamp = NaiveDateTime::parse_from_str(ts_raw, &mapping.timestamp_format)
            .map_err(|_| EventLogError::BadTimestamp {
                row,
                value: ts_raw.to_string(),
                format: mapping.timestamp_format.clone(),
            })?
            .and_utc()
            .timestamp();

        let builder = cases.entry(case_id.to_string()).or_insert_with(|| Builder {
            case_attrs: BTreeMap::new(),
            events: Vec::new(),
        });
        let mut event_attrs = BTreeMap::new();
        for &(idx, def) in &attr_idx {
            let value = parse_attr_value(field(idx), def.kind, &mut coercions);
            match def.scope {
                AttrScope::Case => {
                    builder.case_attrs.entry(def.name.clone()).or_insert(value);
                }
                AttrScope::Event => {
                    event_attrs.insert(def.name.clone(), value);
                }
            }
        }
        builder.events.push(Event {
            activity: activity.to_string(),
            timestamp,
            attrs: event_attrs,
        });
    }

    if cases.is_empty() {
        return Err(EventLogError::EmptyLog);
    }
    let traces = cases
        .into_iter()
        .map(|(case_id, b)| Trace {
            case_id,
            case_attrs: b.case_attrs,
            events: b.events,
        })
        .collect();
    let log = EventLog::from_traces(traces, schema.clone())?;
    Ok(ParsedLog {
        log,
        numeric_coercions: coercions,
    })
}

fn format_attr(value: Option<&AttrValue>) -> String {
    match value {
        Some(AttrValue::Cat(s)) => s.clone(),
        Some(AttrValue::Num(x)) => format!("{x}"),
        Some(AttrValue::Missing) | None => String::new(),
    }
}

/// Writes a log back to CSV in the shape [`parse_event_log`] reads:
/// mandatory columns first, then the declared attributes in order.
pub fn write_csv<W: Write>(
    log: &EventLog,
    writer: W,
    mapping: &ColumnMapping,
) -> Result<(), EventLogError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        mapping.case_id.clone(),
        mapping.activity.clone(),
        mapping.timestamp.clone(),
    ];
    header.extend(log.schema.attrs.iter().map(|a| a.name.clone()));
    wtr.write_record(&header)
        .map_err(|e| EventLogError::Csv { row: 1, source: e })?;

    let mut row = 1u64;
    for trace in &log.traces {
        for event in &trace.events {
            row += 1;
            let ts = chrono::DateTime::from_timestamp(event.timestamp, 0)
                .expect("timestamp in range")
                .naive_utc()
                .format(&mapping.timestamp_format)
                .to_string();
            let mut record = vec![trace.case_id.clone(), event.activity.clone(), ts];
            for def in &log.schema.attrs {
                let value = match def.scope {
                    AttrScope::Case => trace.case_attrs.get(&def.name),
                    AttrScope::Event => event.attrs.get(&def.name),
                };
                record.push(format_attr(value));
            }
            wtr.write_record(&record)
                .map_err(|e| EventLogError::Csv { row, source: e })?;
        }
    }
    wtr.flush()?;
    Ok(())
}
