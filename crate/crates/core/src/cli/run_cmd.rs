use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{CliError, CmdResult};
use crate::config::RunConfig;
use crate::evaluate::grid::grid_search;
use crate::evaluate::ranking::rank_lowest;
use crate::evaluate::{
    earliness_curve, split_log, temporal_split, weighted_summary, EarlinessRow, WeightedSummary,
};
use crate::eventlog::{
    extract_prefix_log, parse_event_log, preprocess, AttributeSchema, LabeledPrefix,
    SECONDS_PER_DAY,
};
use crate::predict::{fit_method, MethodDescriptor, MethodParams, ModelBundle};

#[derive(Args)]
pub struct RunArgs {
    /// Run configuration TOML; relative log and output paths resolve
    /// against its directory
    #[arg(long)]
    pub config: PathBuf,

    /// Methods trained in parallel
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

enum MethodStatus {
    Done {
        bundle: Box<ModelBundle>,
        curve: Vec<EarlinessRow>,
        summary: WeightedSummary,
        cv_mae: f64,
        best_params: MethodParams,
    },
    TimedOut,
}

struct MethodOutcome {
    descriptor: MethodDescriptor,
    status: MethodStatus,
    evaluated_points: usize,
    grid_secs: f64,
    train_secs: f64,
    predict_secs: f64,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ManifestMethod {
    name: String,
    status: &'static str,
    evaluated_grid_points: usize,
    cv_mae_seconds: Option<f64>,
    best_params: Option<MethodParams>,
    grid_secs: f64,
    train_secs: f64,
    predict_secs: f64,
}

#[derive(Serialize)]
struct Manifest {
    dataset: String,
    seed: u64,
    config_sha256: String,
    train_ratio: f64,
    cv_folds: usize,
    max_prefix: usize,
    n_train_cases: usize,
    n_test_cases: usize,
    n_train_prefixes: usize,
    n_test_prefixes: usize,
    methods: Vec<ManifestMethod>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn run_method(
    config: &RunConfig,
    descriptor: &MethodDescriptor,
    attr_schema: &AttributeSchema,
    train_prefixes: &[LabeledPrefix],
    test_prefixes: &[LabeledPrefix],
    mean_duration_secs: f64,
) -> Result<MethodOutcome, CliError> {
    let deadline = config
        .timeout_secs
        .map(|s| Instant::now() + Duration::from_secs(s));
    let mut warnings = Vec::new();
    let grid = config.grid_for(descriptor);

    let grid_started = Instant::now();
    let outcome = grid_search(
        train_prefixes,
        attr_schema,
        descriptor,
        &grid,
        config.cv_folds,
        config.seed,
        deadline,
        &mut warnings,
    )?;
    let grid_secs = grid_started.elapsed().as_secs_f64();

    if outcome.timed_out || deadline.is_some_and(|d| Instant::now() >= d) {
        warnings.push(format!(
            "method {} exceeded its {}s budget after {} of {} grid points",
            descriptor.name,
            config.timeout_secs.unwrap_or_default(),
            outcome.evaluated,
            grid.len()
        ));
        return Ok(MethodOutcome {
            descriptor: descriptor.clone(),
            status: MethodStatus::TimedOut,
            evaluated_points: outcome.evaluated,
            grid_secs,
            train_secs: 0.0,
            predict_secs: 0.0,
            warnings,
        });
    }

    let tuned = MethodDescriptor {
        params: outcome.best_params.clone(),
        ..descriptor.clone()
    };
    let train_started = Instant::now();
    let bundle = fit_method(train_prefixes, attr_schema, &tuned, &mut warnings)?;
    let train_secs = train_started.elapsed().as_secs_f64();

    let predict_started = Instant::now();
    let curve = earliness_curve(&bundle, test_prefixes, config.max_prefix)?;
    let predict_secs = predict_started.elapsed().as_secs_f64();
    let summary = weighted_summary(&curve, mean_duration_secs)?;

    Ok(MethodOutcome {
        descriptor: descriptor.clone(),
        status: MethodStatus::Done {
            bundle: Box::new(bundle),
            curve,
            summary,
            cv_mae: outcome.best_mae,
            best_params: outcome.best_params,
        },
        evaluated_points: outcome.evaluated,
        grid_secs,
        train_secs,
        predict_secs,
        warnings,
    })
}

fn run_methods(
    config: &RunConfig,
    descriptors: &[MethodDescriptor],
    attr_schema: &AttributeSchema,
    train_prefixes: &[LabeledPrefix],
    test_prefixes: &[LabeledPrefix],
    mean_duration_secs: f64,
    jobs: usize,
) -> Result<Vec<MethodOutcome>, CliError> {
    let jobs = jobs.clamp(1, descriptors.len().max(1));
    let next = Mutex::new(0usize);
    let slots: Mutex<Vec<Option<Result<MethodOutcome, CliError>>>> =
        Mutex::new((0..descriptors.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = {
                    let mut guard = next.lock().unwrap();
                    let i = *guard;
                    if i >= descriptors.len() {
                        return;
                    }
                    *guard += 1;
                    i
                };
                let result = run_method(
                    config,
                    &descriptors[i],
                    attr_schema,
                    train_prefixes,
                    test_prefixes,
                    mean_duration_secs,
                );
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every method slot is filled"))
        .collect()
}

fn write_results_csv(
    path: &Path,
    dataset: &str,
    outcomes: &[MethodOutcome],
) -> Result<(), CliError> {
    let mut out =
        String::from("dataset,method,bucketing,encoding,predictor,k,n_prefixes,mae_seconds\n");
    for outcome in outcomes {
        let MethodStatus::Done { curve, .. } = &outcome.status else {
            continue;
        };
        let d = &outcome.descriptor;
        let bucketing = d.bucketing.map(|b| b.name()).unwrap_or("");
        let encoding = d.encoding.map(|e| e.name()).unwrap_or("");
        for row in curve {
            out.push_str(&format!(
                "{dataset},{},{bucketing},{encoding},{},{},{},{}\n",
                d.name,
                d.predictor.name(),
                row.k,
                row.n_prefixes,
                row.mae_seconds
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_summary_csv(
    path: &Path,
    dataset: &str,
    outcomes: &[MethodOutcome],
    ranks: &[Option<usize>],
) -> Result<(), CliError> {
    let mut out =
        String::from("dataset,method,weighted_mae,weighted_std,normalized_mae,mean_rank\n");
    for (outcome, rank) in outcomes.iter().zip(ranks) {
        let name = &outcome.descriptor.name;
        match (&outcome.status, rank) {
            (MethodStatus::Done { summary, .. }, Some(rank)) => {
                out.push_str(&format!(
                    "{dataset},{name},{},{},{},{rank}\n",
                    summary.weighted_mae, summary.weighted_std, summary.normalized_mae
                ));
            }
            _ => out.push_str(&format!(
                "{dataset},{name},timeout,timeout,timeout,timeout\n"
            )),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_summary_md(
    path: &Path,
    dataset: &str,
    config: &RunConfig,
    manifest: &Manifest,
    outcomes: &[MethodOutcome],
    ranks: &[Option<usize>],
    warnings: &[String],
) -> Result<(), CliError> {
    let mut md = String::new();
    md.push_str(&format!("# Benchmark run: {dataset}\n\n"));
    md.push_str(&format!(
        "- seed {}, train ratio {}, {} CV folds, prefixes capped at {}\n",
        config.seed, config.train_ratio, config.cv_folds, config.max_prefix
    ));
    md.push_str(&format!(
        "- {} train / {} test cases; {} train / {} test prefixes\n",
        manifest.n_train_cases,
        manifest.n_test_cases,
        manifest.n_train_prefixes,
        manifest.n_test_prefixes
    ));
    md.push_str(&format!("- config sha256 `{}`\n\n", manifest.config_sha256));
    md.push_str("| method | bucketing | encoding | predictor | weighted MAE (days) | std (days) | normalized | rank |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for (outcome, rank) in outcomes.iter().zip(ranks) {
        let d = &outcome.descriptor;
        let bucketing = d.bucketing.map(|b| b.name()).unwrap_or("-");
        let encoding = d.encoding.map(|e| e.name()).unwrap_or("-");
        match (&outcome.status, rank) {
            (MethodStatus::Done { summary, .. }, Some(rank)) => {
                md.push_str(&format!(
                    "| {} | {bucketing} | {encoding} | {} | {:.3} | {:.3} | {:.3} | {rank} |\n",
                    d.name,
                    d.predictor.name(),
                    summary.weighted_mae / SECONDS_PER_DAY,
                    summary.weighted_std / SECONDS_PER_DAY,
                    summary.normalized_mae,
                ));
            }
            _ => {
                md.push_str(&format!(
                    "| {} | {bucketing} | {encoding} | {} | timeout | | | |\n",
                    d.name,
                    d.predictor.name()
                ));
            }
        }
    }
    md.push_str("\nTied methods share the lowest rank of their block.\n");
    if warnings.is_empty() {
        md.push_str("\nNo warnings.\n");
    } else {
        md.push_str("\n## Warnings\n\n");
        for w in warnings {
            md.push_str(&format!("- {w}\n"));
        }
    }
    fs::write(path, md)?;
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> CmdResult {
    let config_text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Message(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let config = RunConfig::from_toml(&config_text)?;
    let descriptors = config.descriptors()?;
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let config_sha256: String = {
        let digest = Sha256::digest(config_text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    };

    let mut warnings: Vec<String> = Vec::new();

    let log_path = resolve(&config_dir, &config.log.path);
    let file = File::open(&log_path)
        .map_err(|e| CliError::Message(format!("cannot open log {}: {e}", log_path.display())))?;
    let parsed = parse_event_log(file, &config.log.mapping(), &config.schema())?;
    if parsed.numeric_coercions > 0 {
        warnings.push(format!(
            "{} numeric values failed to parse and were treated as missing",
            parsed.numeric_coercions
        ));
    }
    let log = preprocess(&parsed.log, &config.preprocess);
    let mean_duration_secs = log.mean_case_duration_secs();

    let split = temporal_split(&log, config.train_ratio, &mut warnings)?;
    let (train_log, test_log) = split_log(&log, &split);
    if test_log.traces.is_empty() {
        return Err(CliError::Message(format!(
            "temporal split produced no test cases from {} cases at train_ratio {}",
            log.n_cases(),
            config.train_ratio
        )));
    }
    let train_prefixes = extract_prefix_log(&train_log, config.max_prefix);
    let test_prefixes = extract_prefix_log(&test_log, config.max_prefix);
    if train_prefixes.is_empty() {
        return Err(CliError::Message(
            "no training prefixes: every training case has a single event".into(),
        ));
    }
    if test_prefixes.is_empty() {
        return Err(CliError::Message(
            "no test prefixes: every test case has a single event".into(),
        ));
    }

    let outcomes = run_methods(
        &config,
        &descriptors,
        &log.schema,
        &train_prefixes,
        &test_prefixes,
        mean_duration_secs,
        args.jobs,
    )?;
    for outcome in &outcomes {
        warnings.extend(outcome.warnings.iter().cloned());
    }

    let done_maes: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match &o.status {
            MethodStatus::Done { summary, .. } => Some(summary.weighted_mae),
            MethodStatus::TimedOut => None,
        })
        .collect();
    let done_ranks = rank_lowest(&done_maes);
    let mut rank_iter = done_ranks.into_iter();
    let ranks: Vec<Option<usize>> = outcomes
        .iter()
        .map(|o| match o.status {
            MethodStatus::Done { .. } => rank_iter.next(),
            MethodStatus::TimedOut => None,
        })
        .collect();

    let output_dir = resolve(&config_dir, &config.output_dir);
    fs::create_dir_all(&output_dir)?;
    for outcome in &outcomes {
        if let MethodStatus::Done { bundle, .. } = &outcome.status {
            bundle.save(&output_dir.join("models").join(&outcome.descriptor.name))?;
        }
    }

    let manifest = Manifest {
        dataset: config.dataset.clone(),
        seed: config.seed,
        config_sha256,
        train_ratio: config.train_ratio,
        cv_folds: config.cv_folds,
        max_prefix: config.max_prefix,
        n_train_cases: train_log.n_cases(),
        n_test_cases: test_log.n_cases(),
        n_train_prefixes: train_prefixes.len(),
        n_test_prefixes: test_prefixes.len(),
        methods: outcomes
            .iter()
            .map(|o| ManifestMethod {
                name: o.descriptor.name.clone(),
                status: match o.status {
                    MethodStatus::Done { .. } => "ok",
                    MethodStatus::TimedOut => "timeout",
                },
                evaluated_grid_points: o.evaluated_points,
                cv_mae_seconds: match &o.status {
                    MethodStatus::Done { cv_mae, .. } => Some(*cv_mae),
                    MethodStatus::TimedOut => None,
                },
                best_params: match &o.status {
                    MethodStatus::Done { best_params, .. } => Some(best_params.clone()),
                    MethodStatus::TimedOut => None,
                },
                grid_secs: o.grid_secs,
                train_secs: o.train_secs,
                predict_secs: o.predict_secs,
            })
            .collect(),
    };

    write_results_csv(&output_dir.join("results.csv"), &config.dataset, &outcomes)?;
    write_summary_csv(
        &output_dir.join("summary.csv"),
        &config.dataset,
        &outcomes,
        &ranks,
    )?;
    write_summary_md(
        &output_dir.join("summary.md"),
        &config.dataset,
        &config,
        &manifest,
        &outcomes,
        &ranks,
        &warnings,
    )?;
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    fs::write(output_dir.join("manifest.json"), manifest_json)?;

    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    for (outcome, rank) in outcomes.iter().zip(&ranks) {
        match (&outcome.status, rank) {
            (MethodStatus::Done { summary, .. }, Some(rank)) => writeln!(
                handle,
                "{}: weighted MAE {:.3} days (rank {rank})",
                outcome.descriptor.name,
                summary.weighted_mae / SECONDS_PER_DAY
            )?,
            _ => writeln!(handle, "{}: timeout", outcome.descriptor.name)?,
        }
    }
    writeln!(handle, "results written to {}", output_dir.display())?;

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(!warnings.is_empty())
}
