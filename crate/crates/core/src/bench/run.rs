use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::{DetectorEntry, ExperimentConfig};
use super::table::{emit_report, write_atomic, CellOutcome, ReportFormat, ResultRow, ResultsTable};
use crate::data::{prefix_split, zscore_apply, zscore_fit, SplitResult, TimeSeriesDataset};
use crate::metrics::evaluate;
use crate::Result;

/// Bumped whenever cell semantics change, invalidating cached cells.
const CELL_FORMAT: u32 = 1;

pub const CELLS_DIR: &str = "cells";
pub const AGGREGATES_FILE: &str = "aggregates.csv";

/// Canonical split label, e.g. `0.1`.
pub fn split_label(threshold: f64) -> String {
    threshold.to_string()
}

/// Hex SHA-256 of everything that determines one cell's result.
pub fn cell_hash(
    config: &ExperimentConfig,
    dataset: usize,
    detector: &DetectorEntry,
    threshold: f64,
    seed: u64,
) -> Result<String> {
    let key = serde_json::json!({
        "format": CELL_FORMAT,
        "dataset": config.datasets[dataset],
        "detector": detector,
        "threshold": threshold,
        "seed": seed,
        "metrics": config.metrics,
        "fair_setting": config.fair_setting,
    });
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&key)?)))
}

/// Progress notification: the finished row and whether it came from cache.
pub type Progress<'a> = &'a mut dyn FnMut(&ResultRow, bool);

struct Prepared {
    split: SplitResult,
    normalized: TimeSeriesDataset,
}

fn prepare(ds: &TimeSeriesDataset, threshold: f64) -> Result<Prepared> {
    let split = prefix_split(ds, threshold)?;
    let stats = zscore_fit(ds, 0..split.train_end)?;
    let normalized = zscore_apply(ds, &stats)?;
    Ok(Prepared { split, normalized })
}

fn run_cell(
    prep: &Prepared,
    entry: &DetectorEntry,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<crate::metrics::MetricReport> {
    let ds = &prep.normalized;
    let (train_end, total) = (prep.split.train_end, ds.len());
    let spec = &entry.detector;
    let (fit_on, eval_on) = if spec.mode().is_supervised() {
        (ds.slice(0, train_end), ds.slice(train_end, total))
    } else if config.fair_setting {
        (
            ds.slice(0, train_end).without_labels(),
            ds.slice(train_end, total),
        )
    } else {
        (ds.without_labels(), ds.clone())
    };
    let detector = spec.fit(&fit_on, seed)?;
    let scores = detector.score(eval_on.values())?;
    let labels = eval_on.require_labels("evaluation")?;
    evaluate(&scores, labels, &config.metrics.with_seed(seed))
}

fn cached(path: &Path) -> Option<ResultRow> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every (dataset, split threshold, detector, seed) cell, reusing
/// cached cells, and returns the table without writing report files.
pub fn run_cells(config: &ExperimentConfig, progress: Progress) -> Result<ResultsTable> {
    config.validate()?;
    let cells_dir = config.output_dir.join(CELLS_DIR);
    std::fs::create_dir_all(&cells_dir)?;
    let nt = config.thresholds.len();
    let (nd, ns) = (config.detectors.len(), config.seeds.len());
    let mut slots: Vec<Option<ResultRow>> = vec![None; config.datasets.len() * nt * nd * ns];

    for (di, source) in config.datasets.iter().enumerate() {
        let name = source.name();
        for (si, &seed) in config.seeds.iter().enumerate() {
            let mut loaded: Option<std::result::Result<TimeSeriesDataset, String>> = None;
            for (ti, &threshold) in config.thresholds.iter().enumerate() {
                let mut prepared: Option<std::result::Result<Prepared, String>> = None;
                for (ki, entry) in config.detectors.iter().enumerate() {
                    let hash = cell_hash(config, di, entry, threshold, seed)?;
                    let cell_path = cells_dir.join(format!("{hash}.json"));
                    let row = if let Some(row) = cached(&cell_path) {
                        progress(&row, true);
                        row
                    } else {
                        let ds = loaded
                            .get_or_insert_with(|| source.load(seed).map_err(|e| e.to_string()));
                        let prep = prepared.get_or_insert_with(|| match ds {
                            Ok(ds) => prepare(ds, threshold).map_err(|e| e.to_string()),
                            Err(e) => Err(e.clone()),
                        });
                        let outcome = match prep {
                            Err(reason) => CellOutcome::Failed {
                                reason: reason.clone(),
                            },
                            Ok(prep) => match run_cell(prep, entry, seed, config) {
                                Ok(report) => {
                                    let mut report = report.with_meta(
                                        &entry.label,
                                        &name,
                                        &split_label(threshold),
                                    );
                                    report.config_hash = hash.clone();
                                    CellOutcome::Ok { report }
                                }
                                Err(e) => CellOutcome::Failed {
                                    reason: e.to_string(),
                                },
                            },
                        };
                        let row = ResultRow {
                            detector: entry.label.clone(),
                            mode: entry.detector.mode(),
                            dataset: name.clone(),
                            split: split_label(threshold),
                            seed,
                            config_hash: hash,
                            outcome,
                        };
                        write_atomic(
                            &cell_path,
                            (serde_json::to_string_pretty(&row)? + "\n").as_bytes(),
                        )?;
                        progress(&row, false);
                        row
                    };
                    slots[((di * nt + ti) * nd + ki) * ns + si] = Some(row);
                }
            }
        }
    }
    Ok(ResultsTable {
        rows: slots
            .into_iter()
            .map(|r| r.expect("every cell visited"))
            .collect(),
    })
}

/// Writes results.{csv,json,md} and aggregates.csv under `dir`.
pub fn write_outputs(table: &ResultsTable, dir: &Path) -> Result<()> {
    for f in ReportFormat::ALL {
        emit_report(table, f, dir)?;
    }
    write_atomic(
        &dir.join(AGGREGATES_FILE),
        table.aggregates_csv().as_bytes(),
    )
}

/// Runs the configured grid and writes every report file to the output
/// directory. Per-cell failures are recorded in the table, not returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable> {
    run_experiment_with(config, &mut |_, _| {})
}

pub fn run_experiment_with(config: &ExperimentConfig, progress: Progress) -> Result<ResultsTable> {
    let table = run_cells(config, progress)?;
    write_outputs(&table, &config.output_dir)?;
    Ok(table)
}
