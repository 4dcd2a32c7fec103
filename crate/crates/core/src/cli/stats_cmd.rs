use std::fs::File;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use super::{CliError, CmdResult};
use crate::config::RunConfig;
use crate::eventlog::{
    log_stats, parse_event_log, preprocess, AttributeSchema, ColumnMapping, LogStats,
    PreprocessConfig, DEFAULT_TIMESTAMP_FORMAT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Event log CSV; alternatively point --config at a run config
    #[arg(long, conflicts_with = "config")]
    pub log: Option<PathBuf>,

    /// Run config supplying log path, columns, attributes and
    /// preprocessing options
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value = "case_id")]
    pub case_id: String,

    #[arg(long, default_value = "activity")]
    pub activity: String,

    #[arg(long, default_value = "timestamp")]
    pub timestamp: String,

    #[arg(long, default_value = DEFAULT_TIMESTAMP_FORMAT)]
    pub timestamp_format: String,

    /// Apply preprocessing before computing statistics
    #[arg(long)]
    pub preprocess: bool,

    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

fn stats_csv(stats: &LogStats) -> String {
    format!(
        "n_cases,distinct_trace_ratio,n_event_classes,mean_distinct_event_ratio,\
         mean_case_length,cv_case_length,mean_case_duration_days,cv_case_duration\n\
         {},{},{},{},{},{},{},{}\n",
        stats.n_cases,
        stats.distinct_trace_ratio,
        stats.n_event_classes,
        stats.mean_distinct_event_ratio,
        stats.mean_case_length,
        stats.cv_case_length,
        stats.mean_case_duration_days,
        stats.cv_case_duration,
    )
}

pub fn cmd_stats(args: &StatsArgs) -> CmdResult {
    let (path, mapping, schema, pre) = match (&args.config, &args.log) {
        (Some(config_path), _) => {
            let config = RunConfig::load(config_path)?;
            (
                config.log.path.clone(),
                config.log.mapping(),
                config.schema(),
                config.preprocess.clone(),
            )
        }
        (None, Some(log_path)) => (
            log_path.clone(),
            ColumnMapping {
                case_id: args.case_id.clone(),
                activity: args.activity.clone(),
                timestamp: args.timestamp.clone(),
                timestamp_format: args.timestamp_format.clone(),
            },
            AttributeSchema::empty(),
            PreprocessConfig::default(),
        ),
        (None, None) => return Err(CliError::Message("pass either --log or --config".into())),
    };

    let file = File::open(&path)
        .map_err(|e| CliError::Message(format!("cannot open log {}: {e}", path.display())))?;
    let parsed = parse_event_log(file, &mapping, &schema)?;
    let log = if args.preprocess {
        preprocess(&parsed.log, &pre)
    } else {
        parsed.log
    };
    let stats = log_stats(&log)?;
    match args.format {
        OutputFormat::Csv => print!("{}", stats_csv(&stats)),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
    }
    if parsed.numeric_coercions > 0 {
        eprintln!(
            "warning: {} numeric values failed to parse and were treated as missing",
            parsed.numeric_coercions
        );
        return Ok(true);
    }
    Ok(false)
}
