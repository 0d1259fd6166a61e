use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::SupervisionMode;
use crate::metrics::{MetricReport, METRIC_NAMES};
use crate::{Error, Result};

/// z for a two-sided 95% normal interval.
pub const CI_Z: f64 = 1.96;

const HEADER: [&str; 15] = [
    "detector",
    "mode",
    "dataset",
    "split",
    "seed",
    "status",
    "cce",
    "f1",
    "aff_f1",
    "uaff_f1",
    "auc_roc",
    "vus_pr",
    "mean",
    "threshold",
    "config_hash",
];
const EXTRA: [&str; 2] = ["aff_precision", "aff_recall"];

const DISPLAY_NAMES: [&str; 6] = ["CCE", "F1", "Aff-F1", "UAff-F1", "AUC", "V-PR"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok { report: MetricReport },
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub detector: String,
    pub mode: SupervisionMode,
    pub dataset: String,
    pub split: String,
    pub seed: u64,
    pub config_hash: String,
    pub outcome: CellOutcome,
}

impl ResultRow {
    pub fn report(&self) -> Option<&MetricReport> {
        match &self.outcome {
            CellOutcome::Ok { report } => Some(report),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn failure(&self) -> Option<&str> {
        match &self.outcome {
            CellOutcome::Ok { .. } => None,
            CellOutcome::Failed { reason } => Some(reason),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub detector: String,
    pub mode: SupervisionMode,
    pub dataset: String,
    pub split: String,
    /// A metric name or `mean` for the mean of the six.
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean and normal-approximation 95% interval `mean ± 1.96·sd/√n`, with the
/// sample standard deviation (0 when n = 1).
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let half = CI_Z * sd / n.sqrt();
    (mean, mean - half, mean + half)
}

fn mode_name(mode: SupervisionMode) -> &'static str {
    match mode {
        SupervisionMode::UtadI => "UTAD-I",
        SupervisionMode::UtadII => "UTAD-II",
        SupervisionMode::Stad => "STAD",
    }
}

fn parse_mode(s: &str) -> Result<SupervisionMode> {
    match s {
        "UTAD-I" => Ok(SupervisionMode::UtadI),
        "UTAD-II" => Ok(SupervisionMode::UtadII),
        "STAD" => Ok(SupervisionMode::Stad),
        other => Err(Error::config(format!("unknown supervision mode `{other}`"))),
    }
}

fn failed_cell(reason: &str) -> String {
    format!("FAILED({reason})")
}

impl ResultsTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failure().is_some()).count()
    }

    /// Per (detector, dataset, split) group in first-appearance order: each
    /// metric and the six-metric mean over the successful seeds.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut keys: Vec<(&str, SupervisionMode, &str, &str)> = Vec::new();
        for r in &self.rows {
            let k = (
                r.detector.as_str(),
                r.mode,
                r.dataset.as_str(),
                r.split.as_str(),
            );
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut out = Vec::new();
        for (detector, mode, dataset, split) in keys {
            let reports: Vec<&MetricReport> = self
                .rows
                .iter()
                .filter(|r| r.detector == detector && r.dataset == dataset && r.split == split)
                .filter_map(|r| r.report())
                .collect();
            if reports.is_empty() {
                continue;
            }
            let names = METRIC_NAMES.iter().copied().chain(std::iter::once("mean"));
            for (i, metric) in names.enumerate() {
                let vals: Vec<f64> = reports
                    .iter()
                    .map(|r| {
                        if i < 6 {
                            r.metrics()[i]
                        } else {
                            r.mean_of_six()
                        }
                    })
                    .collect();
                let (mean, ci_low, ci_high) = mean_ci(&vals);
                out.push(AggregateRow {
                    detector: detector.to_string(),
                    mode,
                    dataset: dataset.to_string(),
                    split: split.to_string(),
                    metric: metric.to_string(),
                    n: vals.len(),
                    mean,
                    ci_low,
                    ci_high,
                });
            }
        }
        out
    }

    /// Mean over successful rows matching the filter, of the six-metric mean.
    pub fn mean_score(&self, pred: impl Fn(&ResultRow) -> bool, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| pred(r))
            .filter_map(|r| r.report())
            .map(|r| {
                if metric == "mean" {
                    r.mean_of_six()
                } else {
                    r.metric(metric).unwrap_or(f64::NAN)
                }
            })
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = HEADER.iter().chain(EXTRA.iter()).copied().collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.detector.clone(),
                mode_name(r.mode).to_string(),
                r.dataset.clone(),
                r.split.clone(),
                r.seed.to_string(),
            ];
            match &r.outcome {
                CellOutcome::Ok { report } => {
                    rec.push("ok".into());
                    rec.extend(report.metrics().iter().map(|v| v.to_string()));
                    rec.push(report.mean_of_six().to_string());
                    rec.push(report.threshold.to_string());
                    rec.push(r.config_hash.clone());
                    rec.push(report.aff_precision.to_string());
                    rec.push(report.aff_recall.to_string());
                }
                CellOutcome::Failed { reason } => {
                    rec.push("failed".into());
                    rec.extend(std::iter::repeat_n(failed_cell(reason), 8));
                    rec.push(r.config_hash.clone());
                    rec.extend(std::iter::repeat_n(failed_cell(reason), 2));
                }
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::config(format!("results csv: {m}"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        let expected: Vec<&str> = HEADER.iter().chain(EXTRA.iter()).copied().collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(bad("unexpected header".into()));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                f(i).parse()
                    .map_err(|_| bad(format!("bad number `{}` in column {}", f(i), expected[i])))
            };
            let seed: u64 = f(4)
                .parse()
                .map_err(|_| bad(format!("bad seed `{}`", f(4))))?;
            let config_hash = f(14).to_string();
            let outcome = match f(5) {
                "ok" => CellOutcome::Ok {
                    report: MetricReport {
                        cce: num(6)?,
                        f1: num(7)?,
                        aff_f1: num(8)?,
                        uaff_f1: num(9)?,
                        auc_roc: num(10)?,
                        vus_pr: num(11)?,
                        threshold: num(13)?,
                        aff_precision: num(15)?,
                        aff_recall: num(16)?,
                        detector: f(0).to_string(),
                        dataset: f(2).to_string(),
                        split: f(3).to_string(),
                        seed,
                        config_hash: config_hash.clone(),
                    },
                },
                "failed" => {
                    let cell = f(6);
                    let reason = cell
                        .strip_prefix("FAILED(")
                        .and_then(|s| s.strip_suffix(')'))
                        .ok_or_else(|| bad(format!("malformed failure cell `{cell}`")))?;
                    CellOutcome::Failed {
                        reason: reason.to_string(),
                    }
                }
                other => return Err(bad(format!("unknown status `{other}`"))),
            };
            rows.push(ResultRow {
                detector: f(0).to_string(),
                mode: parse_mode(f(1))?,
                dataset: f(2).to_string(),
                split: f(3).to_string(),
                seed,
                config_hash,
                outcome,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-row table plus a mean ± CI table, best value per column in bold.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let metric_header = DISPLAY_NAMES.join(" | ");
        let _ = writeln!(
            s,
            "| Detector | Mode | Dataset | Split | Seed | {metric_header} | Avg. |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|{}---|", "---:|".repeat(6));
        let cols: Vec<Vec<Option<f64>>> = self
            .rows
            .iter()
            .map(|r| match r.report() {
                Some(rep) => rep
                    .metrics()
                    .iter()
                    .copied()
                    .chain([rep.mean_of_six()])
                    .map(Some)
                    .collect(),
                None => vec![None; 7],
            })
            .collect();
        let best = column_best(&cols);
        for (r, vals) in self.rows.iter().zip(&cols) {
            let cells: Vec<String> = match r.failure() {
                Some(reason) => vec![failed_cell(reason); 7],
                None => vals
                    .iter()
                    .zip(&best)
                    .map(|(v, b)| bold_if(v.unwrap(), *b == *v))
                    .collect(),
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                r.detector,
                mode_name(r.mode),
                r.dataset,
                r.split,
                r.seed,
                cells.join(" | ")
            );
        }

        let agg = self.aggregates();
        if !agg.is_empty() {
            let groups: Vec<&[AggregateRow]> = agg.chunks(7).collect();
            let cols: Vec<Vec<Option<f64>>> = groups
                .iter()
                .map(|g| g.iter().map(|a| Some(a.mean)).collect())
                .collect();
            let best = column_best(&cols);
            let _ = writeln!(
                s,
                "\n| Detector | Mode | Dataset | Split | n | {metric_header} | Avg. |"
            );
            let _ = writeln!(s, "|---|---|---|---|---|{}---|", "---:|".repeat(6));
            for g in groups {
                let cells: Vec<String> = g
                    .iter()
                    .zip(&best)
                    .map(|(a, b)| {
                        let text = format!("{:.2} ± {:.2}", a.mean, a.ci_high - a.mean);
                        if *b == Some(a.mean) {
                            format!("**{text}**")
                        } else {
                            text
                        }
                    })
                    .collect();
                let a = &g[0];
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    a.detector,
                    mode_name(a.mode),
                    a.dataset,
                    a.split,
                    a.n,
                    cells.join(" | ")
                );
            }
        }
        s
    }

    pub fn aggregates_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "detector", "mode", "dataset", "split", "metric", "n", "mean", "ci_low", "ci_high",
        ])
        .expect("in-memory write");
        for a in self.aggregates() {
            w.write_record([
                a.detector,
                mode_name(a.mode).to_string(),
                a.dataset,
                a.split,
                a.metric,
                a.n.to_string(),
                a.mean.to_string(),
                a.ci_low.to_string(),
                a.ci_high.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

fn bold_if(v: f64, bold: bool) -> String {
    if bold {
        format!("**{v:.2}**")
    } else {
        format!("{v:.2}")
    }
}

/// Column-wise maximum over present values.
pub(crate) fn column_best(rows: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let width = rows.first().map_or(0, |r| r.len());
    (0..width)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r[c])
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Csv,
        ReportFormat::Json,
        ReportFormat::Markdown,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "results.csv",
            ReportFormat::Json => "results.json",
            ReportFormat::Markdown => "results.md",
        }
    }
}

/// Writes `table` in `format` under `dir`; returns the file path.
pub fn emit_report(table: &ResultsTable, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    if table.rows.is_empty() {
        return Err(Error::config("cannot report an empty results table"));
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    let text = match format {
        ReportFormat::Csv => table.to_csv(),
        ReportFormat::Json => table.to_json()?,
        ReportFormat::Markdown => table.to_markdown(),
    };
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Replaces `path` via a temporary sibling and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a table from a results file, picking the format by extension.
pub fn load_table(path: &Path) -> Result<ResultsTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => ResultsTable::from_csv(&text),
        Some("json") => ResultsTable::from_json(&text),
        _ => Err(Error::ingestion(
            path,
            "expected a .csv or .json results file",
        )),
    }
}
