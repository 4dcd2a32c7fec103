use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::Args;

use super::{CliError, CmdResult};
use crate::evaluate::ranking::rank_methods;
use crate::eventlog::SECONDS_PER_DAY;

#[derive(Args)]
pub struct ReportArgs {
    /// Run output directories, searched recursively for summary.csv and
    /// results.csv files
    #[arg(long = "results", required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,

    /// Directory for report.md and the per-method earliness data files
    #[arg(long)]
    pub output: PathBuf,
}

fn find_files(root: &Path, name: &str, hits: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if root.is_file() {
        if root.file_name().is_some_and(|f| f == name) {
            hits.push(root.to_path_buf());
        }
        return Ok(());
    }
    if root.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(root)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for entry in entries {
            find_files(&entry, name, hits)?;
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// weighted MAE per (dataset, method); unparseable cells (e.g. timeout
/// markers) stay absent.
fn read_summaries(paths: &[PathBuf]) -> Result<BTreeMap<String, BTreeMap<String, f64>>, CliError> {
    let mut per_dataset: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for path in paths {
        let mut reader = csv::Reader::from_reader(File::open(path)?);
        for record in reader.records() {
            let record = record.map_err(|e| {
                CliError::Message(format!("bad summary row in {}: {e}", path.display()))
            })?;
            let (Some(dataset), Some(method), Some(mae)) =
                (record.get(0), record.get(1), record.get(2))
            else {
                return Err(CliError::Message(format!(
                    "summary row in {} is missing columns",
                    path.display()
                )));
            };
            if !seen.insert((dataset.to_string(), method.to_string())) {
                return Err(CliError::Message(format!(
                    "duplicate descriptor: method {method:?} appears twice for dataset {dataset:?}"
                )));
            }
            if let Ok(value) = mae.parse::<f64>() {
                per_dataset
                    .entry(dataset.to_string())
                    .or_default()
                    .insert(method.to_string(), value);
            }
        }
    }
    Ok(per_dataset)
}

struct EarlinessSeries {
    rows: Vec<(usize, usize, f64)>,
}

fn read_results(
    paths: &[PathBuf],
) -> Result<BTreeMap<(String, String), EarlinessSeries>, CliError> {
    let mut series: BTreeMap<(String, String), EarlinessSeries> = BTreeMap::new();
    for path in paths {
        let mut reader = csv::Reader::from_reader(File::open(path)?);
        for record in reader.records() {
            let record = record.map_err(|e| {
                CliError::Message(format!("bad results row in {}: {e}", path.display()))
            })?;
            let parse_err = || {
                CliError::Message(format!(
                    "results row in {} is malformed: {:?}",
                    path.display(),
                    record
                ))
            };
            let dataset = record.get(0).ok_or_else(parse_err)?.to_string();
            let method = record.get(1).ok_or_else(parse_err)?.to_string();
            let k: usize = record
                .get(5)
                .and_then(|v| v.parse().ok())
                .ok_or_else(parse_err)?;
            let n: usize = record
                .get(6)
                .and_then(|v| v.parse().ok())
                .ok_or_else(parse_err)?;
            let mae: f64 = record
                .get(7)
                .and_then(|v| v.parse().ok())
                .ok_or_else(parse_err)?;
            series
                .entry((dataset, method))
                .or_insert_with(|| EarlinessSeries { rows: Vec::new() })
                .rows
                .push((k, n, mae));
        }
    }
    for s in series.values_mut() {
        s.rows.sort_by_key(|(k, ..)| *k);
    }
    Ok(series)
}

pub fn cmd_report(args: &ReportArgs) -> CmdResult {
    let mut summary_paths = Vec::new();
    let mut results_paths = Vec::new();
    for root in &args.results {
        if !root.exists() {
            return Err(CliError::Message(format!(
                "results path {} does not exist",
                root.display()
            )));
        }
        find_files(root, "summary.csv", &mut summary_paths)?;
        find_files(root, "results.csv", &mut results_paths)?;
    }
    if summary_paths.is_empty() {
        return Err(CliError::Message(
            "no summary.csv found under the given results paths".into(),
        ));
    }

    let per_dataset_map = read_summaries(&summary_paths)?;
    let per_dataset: Vec<(String, BTreeMap<String, f64>)> = per_dataset_map.into_iter().collect();
    let table = rank_methods(&per_dataset)?;

    let mut warnings: Vec<String> = Vec::new();
    if !table.excluded_datasets.is_empty() {
        warnings.push(format!(
            "datasets excluded for incomplete method coverage: {}",
            table.excluded_datasets.join(", ")
        ));
    }
    if table.friedman.is_none() {
        warnings
            .push("Friedman test skipped: needs at least 3 methods with complete coverage".into());
    }

    let mae_of = |dataset: &str, method: &str| -> Option<f64> {
        per_dataset
            .iter()
            .find(|(d, _)| d == dataset)
            .and_then(|(_, maes)| maes.get(method).copied())
    };

    let mut md = String::new();
    md.push_str("# Method ranking across datasets\n\n");
    md.push_str(&format!(
        "{} dataset(s), {} method(s).\n\n",
        table.datasets.len(),
        table.methods.len()
    ));

    md.push_str("## Weighted MAE (days)\n\n");
    md.push_str(&format!("| dataset | {} |\n", table.methods.join(" | ")));
    md.push_str(&format!("|---|{}\n", "---|".repeat(table.methods.len())));
    for dataset in &table.datasets {
        let cells: Vec<String> = table
            .methods
            .iter()
            .map(|m| match mae_of(dataset, m) {
                Some(v) => format!("{:.3}", v / SECONDS_PER_DAY),
                None => "-".into(),
            })
            .collect();
        md.push_str(&format!("| {dataset} | {} |\n", cells.join(" | ")));
    }

    md.push_str("\n## Ranks\n\n");
    md.push_str(&format!("| dataset | {} |\n", table.methods.join(" | ")));
    md.push_str(&format!("|---|{}\n", "---|".repeat(table.methods.len())));
    for (dataset, ranks) in table.datasets.iter().zip(&table.ranks) {
        let cells: Vec<String> = ranks.iter().map(|r| r.to_string()).collect();
        md.push_str(&format!("| {dataset} | {} |\n", cells.join(" | ")));
    }
    let means: Vec<String> = table.mean_ranks.iter().map(|r| format!("{r:.2}")).collect();
    md.push_str(&format!("| **mean rank** | {} |\n", means.join(" | ")));
    md.push_str(
        "\nRanks follow ascending weighted MAE; tied methods share the lowest rank of their block.\n",
    );
    if !table.excluded_datasets.is_empty() {
        md.push_str(&format!(
            "\nExcluded for incomplete method coverage: {}.\n",
            table.excluded_datasets.join(", ")
        ));
    }

    md.push_str("\n## Friedman test\n\n");
    match table.friedman {
        Some(f) => md.push_str(&format!(
            "chi^2_F = {:.6}, df = {} over {} dataset(s); ranks enter the statistic with average-tie handling.\n",
            f.statistic,
            f.df,
            table.datasets.len()
        )),
        None => md.push_str(
            "Skipped: the test needs at least 3 methods with complete coverage.\n",
        ),
    }

    fs::create_dir_all(&args.output)?;
    fs::write(args.output.join("report.md"), md)?;

    let series = read_results(&results_paths)?;
    for ((dataset, method), series) in &series {
        let mut dat = format!(
            "# remaining-time MAE by prefix length\n# dataset: {dataset}  method: {method}\n# k  mae_days  n_prefixes\n"
        );
        for (k, n, mae) in &series.rows {
            dat.push_str(&format!("{k} {} {n}\n", mae / SECONDS_PER_DAY));
        }
        let file = format!("earliness_{}_{}.dat", sanitize(dataset), sanitize(method));
        fs::write(args.output.join(file), dat)?;
    }

    println!(
        "report written to {} ({} earliness series)",
        args.output.join("report.md").display(),
        series.len()
    );
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(!warnings.is_empty())
}
