//! `stand`: generate data, split, train, score, evaluate, run benches and
//! render reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use stand_core::baselines::{Detector, DetectorSpec};
use stand_core::bench::{
    ablation_matrix, gain_sweep, load_table, run_experiment_with, sensitivity_sweep,
    ExperimentConfig, ResultRow, ResultsTable, SensitivityAxis,
};
use stand_core::data::{
    generate_synthetic, load_csv, prefix_split, write_csv, zscore_apply, zscore_fit, NormStats,
    SuiteSpec, SyntheticSpec, TimeSeriesDataset, DEFAULT_LABEL_COLUMN,
};
use stand_core::metrics::{
    evaluate, read_scores, write_report, write_scores, MetricConfig, ThresholdRule,
};
use stand_core::ndcore::Matrix;
use stand_core::stand::Checkpoint;
use stand_core::{Error, Result};

const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

#[derive(Parser)]
#[command(
    name = "stand",
    version,
    about = "Supervised time-series anomaly detection benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic series from a JSON spec.
    Generate {
        /// A synthetic spec, or a suite spec realized with --seed.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the labeled-prefix split for a threshold.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        label_column: Option<String>,
    },
    /// Fit one detector and write its checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// random, pca, knn, kmeans, logreg or stand.
        #[arg(long)]
        detector: String,
        /// JSON detector spec overriding the defaults for --detector.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Train on the labeled prefix for this split threshold only.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a series with a checkpoint; writes a t,score CSV.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// First timestep to score.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the six metrics for a score file against labels.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Timestep the scores start at.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = stand_core::metrics::DEFAULT_MAX_BUFFER)]
        max_buffer: usize,
        #[arg(long, default_value_t = stand_core::metrics::DEFAULT_MC_DRAWS)]
        mc_draws: usize,
        /// Use a score quantile instead of the best-F1 threshold.
        #[arg(long)]
        quantile: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Gain, ablation or sensitivity sweep over an experiment config.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[arg(long)]
        config: PathBuf,
        /// Sensitivity axis: d_model, tem_layers or window.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated sensitivity values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Render a results file (csv or json) as csv, json or markdown.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Gain,
    Ablation,
    Sensitivity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GenerateSpec {
    Single(SyntheticSpec),
    Suite(SuiteSpec),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

/// An explicit label column must exist; otherwise `label` is used when present.
fn load_data(path: &Path, label_column: Option<&str>) -> Result<TimeSeriesDataset> {
    if label_column.is_some() {
        return load_csv(path, label_column);
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let has_label = rdr
        .headers()
        .map(|h| h.iter().any(|c| c.trim() == DEFAULT_LABEL_COLUMN))
        .unwrap_or(false);
    load_csv(path, has_label.then_some(DEFAULT_LABEL_COLUMN))
}

fn check_start(ds: &TimeSeriesDataset, start: usize) -> Result<()> {
    if start >= ds.len() {
        return Err(Error::Config(format!(
            "--start {start} is beyond the series length {}",
            ds.len()
        )));
    }
    Ok(())
}

fn row_vector(v: &[f64]) -> Result<Matrix> {
    Matrix::from_vec(1, v.len(), v.to_vec())
}

fn train(
    data: &Path,
    detector: &str,
    params: Option<&Path>,
    threshold: Option<f64>,
    seed: u64,
    label_column: Option<&str>,
    out: &Path,
) -> Result<()> {
    let spec: DetectorSpec = match params {
        Some(p) => read_json(p)?,
        None => DetectorSpec::from_kind(detector)?,
    };
    if spec.kind() != detector {
        return Err(Error::Config(format!(
            "--params describes `{}`, not `{detector}`",
            spec.kind()
        )));
    }
    let ds = load_data(data, label_column)?;
    let train_end = match threshold {
        Some(t) => prefix_split(&ds, t)?.train_end,
        None => ds.len(),
    };
    let stats = zscore_fit(&ds, 0..train_end)?;
    let mut train = zscore_apply(&ds, &stats)?.slice(0, train_end);
    if !spec.mode().is_supervised() {
        train = train.without_labels();
    }
    let fitted = spec.fit(&train, seed)?;
    let mut ck = fitted.to_checkpoint()?;
    ck.tensors
        .push((NORM_MEAN.into(), row_vector(&stats.mean)?));
    ck.tensors.push((NORM_STD.into(), row_vector(&stats.std)?));
    ck.save(out)?;
    print_json(&serde_json::json!({
        "detector": fitted.kind(),
        "mode": fitted.mode(),
        "train_end": train_end,
        "checkpoint": out,
    }))
}

fn load_model(path: &Path) -> Result<(Detector, NormStats)> {
    let mut ck = Checkpoint::load(path)?;
    let mut take = |name: &str| -> Result<Vec<f64>> {
        let i = ck
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "checkpoint lacks `{name}`; was it written by `stand train`?"
                ))
            })?;
        Ok(ck.tensors.remove(i).1.into_vec())
    };
    let stats = NormStats {
        mean: take(NORM_MEAN)?,
        std: take(NORM_STD)?,
    };
    Ok((Detector::from_checkpoint(&ck)?, stats))
}

fn progress(quiet: bool) -> impl FnMut(&ResultRow, bool) {
    move |row, cached| {
        if quiet {
            return;
        }
        let status = match (row.report(), row.failure()) {
            (Some(r), _) => format!("mean {:.2}", r.mean_of_six()),
            (None, Some(reason)) => format!("FAILED({reason})"),
            _ => unreachable!(),
        };
        let tag = if cached { " [cached]" } else { "" };
        eprintln!(
            "{} / {} / split {} / seed {}: {status}{tag}",
            row.dataset, row.detector, row.split, row.seed
        );
    }
}

fn finish(table: &ResultsTable, dir: &Path) -> ExitCode {
    let failures = table.failures();
    eprintln!(
        "{} cells, {failures} failed; results in {}",
        table.rows.len(),
        dir.display()
    );
    if failures > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { spec, out, seed } => {
            let spec = match read_json::<GenerateSpec>(&spec)? {
                GenerateSpec::Single(s) => s,
                GenerateSpec::Suite(s) => s.realize(seed)?,
            };
            let ds = generate_synthetic(&spec)?;
            write_csv(&ds, &out)?;
            print_json(&serde_json::json!({
                "name": ds.name,
                "length": ds.len(),
                "channels": ds.channels(),
                "anomaly_rate": ds.anomaly_rate(),
            }))?;
        }
        Command::Split {
            data,
            threshold,
            label_column,
        } => {
            let ds = load_data(&data, label_column.as_deref())?;
            print_json(&prefix_split(&ds, threshold)?)?;
        }
        Command::Train {
            data,
            detector,
            params,
            threshold,
            seed,
            label_column,
            out,
        } => {
            train(
                &data,
                &detector,
                params.as_deref(),
                threshold,
                seed,
                label_column.as_deref(),
                &out,
            )?;
        }
        Command::Score {
            model,
            data,
            start,
            label_column,
            out,
        } => {
            let (detector, stats) = load_model(&model)?;
            let ds = load_data(&data, label_column.as_deref())?;
            check_start(&ds, start)?;
            let ds = zscore_apply(&ds, &stats)?.slice(start, ds.len());
            write_scores(&detector.score(ds.values())?, &out)?;
        }
        Command::Evaluate {
            scores,
            data,
            start,
            label_column,
            seed,
            max_buffer,
            mc_draws,
            quantile,
            out,
        } => {
            let s = read_scores(&scores)?;
            let ds = load_data(&data, label_column.as_deref())?;
            check_start(&ds, start)?;
            let labels = &ds.require_labels("evaluate")?[start..];
            if labels.len() != s.len() {
                return Err(Error::Config(format!(
                    "{} scores for {} labels from timestep {start}",
                    s.len(),
                    labels.len()
                )));
            }
            let config = MetricConfig {
                max_buffer,
                mc_draws,
                seed,
                threshold: quantile
                    .map_or(ThresholdRule::BestF1, |q| ThresholdRule::Quantile { q }),
            };
            let mut report = evaluate(&s, labels, &config)?;
            report.dataset = ds.name.clone();
            if let Some(out) = out {
                write_report(&report, &out)?;
            }
            print_json(&report)?;
        }
        Command::Bench { config, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = run_experiment_with(&cfg, &mut progress(quiet))?;
            return Ok(finish(&table, &cfg.output_dir));
        }
        Command::Sweep {
            kind,
            config,
            axis,
            values,
            quiet,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mut hook = progress(quiet);
            let (table, path) = match kind {
                SweepKind::Gain => gain_sweep(&cfg, &mut hook)?,
                SweepKind::Ablation => ablation_matrix(&cfg, &mut hook)?,
                SweepKind::Sensitivity => {
                    let axis: SensitivityAxis = axis
                        .as_deref()
                        .ok_or_else(|| Error::Config("sensitivity sweep needs --axis".into()))?
                        .parse()?;
                    sensitivity_sweep(&cfg, axis, &values, &mut hook)?
                }
            };
            eprintln!("plot data in {}", path.display());
            return Ok(finish(&table, path.parent().unwrap_or(&cfg.output_dir)));
        }
        Command::Report {
            results,
            format,
            out,
        } => {
            let table = load_table(&results)?;
            if table.rows.is_empty() {
                return Err(Error::Config("results file has no rows".into()));
            }
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json()?,
                Format::Markdown => table.to_markdown(),
            };
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => emit(&text)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
