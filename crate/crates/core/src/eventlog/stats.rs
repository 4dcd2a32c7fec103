use std::collections::BTreeSet;

use serde::Serialize;

use super::{EventLog, EventLogError, SECONDS_PER_DAY};

/// Descriptive statistics of a log. Coefficients of variation are the
/// population standard deviation divided by the mean (0 when the mean is 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogStats {
    pub n_cases: usize,
    /// Distinct activity sequences divided by the number of cases.
    pub distinct_trace_ratio: f64,
    /// Number of distinct activities in the log.
    pub n_event_classes: usize,
    /// Mean over traces of (distinct activities in trace / trace length).
    pub mean_distinct_event_ratio: f64,
    pub mean_case_length: f64,
    pub cv_case_length: f64,
    pub mean_case_duration_days: f64,
    pub cv_case_duration: f64,
}

fn mean_and_cv(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return (0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt() / mean)
}

pub fn log_stats(log: &EventLog) -> Result<LogStats, EventLogError> {
    if log.traces.is_empty() {
        return Err(EventLogError::EmptyLog);
    }
    let n_cases = log.traces.len();

    let sequences: BTreeSet<Vec<&str>> = log
        .traces
        .iter()
        .map(|t| t.activities().collect())
        .collect();
    let classes: BTreeSet<&str> = log.traces.iter().flat_map(|t| t.activities()).collect();
    let der = log
        .traces
        .iter()
        .map(|t| {
            let distinct: BTreeSet<&str> = t.activities().collect();
            distinct.len() as f64 / t.len() as f64
        })
        .sum::<f64>()
        / n_cases as f64;

    let lengths: Vec<f64> = log.traces.iter().map(|t| t.len() as f64).collect();
    let durations: Vec<f64> = log.traces.iter().map(|t| t.duration_secs()).collect();
    let (mean_len, cv_len) = mean_and_cv(&lengths);
    let (mean_dur, cv_dur) = mean_and_cv(&durations);

    Ok(LogStats {
        n_cases,
        distinct_trace_ratio: sequences.len() as f64 / n_cases as f64,
        n_event_classes: classes.len(),
        mean_distinct_event_ratio: der,
        mean_case_length: mean_len,
        cv_case_length: cv_len,
        mean_case_duration_days: mean_dur / SECONDS_PER_DAY,
        cv_case_duration: cv_dur,
    })
}
