use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

use super::MetricReport;

pub fn write_scores_to<W: Write>(scores: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["t", "score"]).map_err(csv_err)?;
    for (t, s) in scores.iter().enumerate() {
        w.write_record([t.to_string(), s.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Score file with columns `t,score`.
pub fn write_scores(scores: &[f64], path: &Path) -> Result<()> {
    write_scores_to(scores, fs::File::create(path)?)
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let mut text = String::new();
    fs::File::open(path)
        .map_err(|e| Error::ingestion(path, e.to_string()))?
        .read_to_string(&mut text)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| Error::ingestion(path, e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "score")
        .ok_or_else(|| Error::ingestion(path, "missing `score` column"))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::ingestion(path, e.to_string()))?;
        let field = rec.get(col).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::ingestion(path, format!("row {}: bad score `{field}`", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_report(report: &MetricReport, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    Ok(serde_json::from_str(&text)?)
}
