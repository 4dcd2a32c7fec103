use std::fs::File;
use std::path::PathBuf;

use clap::Args;

use super::{CliError, CmdResult};
use crate::eventlog::{write_csv, ColumnMapping};
use crate::synth::{generate_log, SynthConfig, SynthPattern};

#[derive(Args)]
pub struct SynthArgs {
    /// Destination CSV path
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub cases: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Activity pattern `A,B,C[:weight[:gap1|gap2|...]]`; repeatable.
    /// Explicit gaps are seconds between consecutive events and must
    /// number one less than the activities.
    #[arg(long = "pattern")]
    pub patterns: Vec<String>,

    /// Base gap between events in seconds, for patterns without
    /// explicit gaps
    #[arg(long, default_value_t = 3600.0)]
    pub gap: f64,

    /// Relative gap jitter in [0, 1); 0 keeps gaps exact
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Seconds between consecutive case starts
    #[arg(long, default_value_t = 600.0)]
    pub interval: f64,
}

fn parse_pattern(spec: &str) -> Result<SynthPattern, CliError> {
    let mut parts = spec.splitn(3, ':');
    let activities: Vec<&str> = parts
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if activities.is_empty() {
        return Err(CliError::Message(format!(
            "pattern {spec:?} names no activities"
        )));
    }
    let weight = match parts.next() {
        Some(w) => w.trim().parse::<f64>().map_err(|_| {
            CliError::Message(format!("pattern {spec:?}: weight {w:?} is not a number"))
        })?,
        None => 1.0,
    };
    let gaps = match parts.next() {
        Some(g) => {
            let gaps: Result<Vec<f64>, _> = g.split('|').map(|x| x.trim().parse::<f64>()).collect();
            Some(
                gaps.map_err(|_| {
                    CliError::Message(format!("pattern {spec:?}: bad gap list {g:?}"))
                })?,
            )
        }
        None => None,
    };
    Ok(match gaps {
        Some(gaps) => SynthPattern::with_gaps(&activities, weight, &gaps),
        None => SynthPattern::new(&activities, weight),
    })
}

pub fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let patterns = if args.patterns.is_empty() {
        vec![
            SynthPattern::new(&["A", "B", "C", "D"], 1.0),
            SynthPattern::new(&["A", "C", "D"], 1.0),
        ]
    } else {
        args.patterns
            .iter()
            .map(|s| parse_pattern(s))
            .collect::<Result<_, _>>()?
    };
    let config = SynthConfig {
        n_cases: args.cases,
        patterns,
        gap_secs: args.gap,
        gap_noise: args.noise,
        case_interval_secs: args.interval,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let log = generate_log(&config)?;
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = File::create(&args.output)?;
    write_csv(&log, file, &ColumnMapping::default())?;
    println!("wrote {} cases to {}", log.n_cases(), args.output.display());
    Ok(false)
}
