use std::io::{Read, Write};
use std::path::Path;

use crate::ndcore::Matrix;
use crate::{Error, Result};

use super::TimeSeriesDataset;

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Loads a headered CSV: every non-label column is a channel.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::ingestion(path, format!("cannot open file: {e}")))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_csv(file, &name, label_column).map_err(|e| match e {
        Error::Ingestion { message, .. } => Error::ingestion(path, message),
        other => other,
    })
}

/// Parses CSV from any reader. Errors carry a placeholder path that
/// [`load_csv`] replaces with the real one.
pub fn read_csv<R: Read>(
    reader: R,
    name: &str,
    label_column: Option<&str>,
) -> Result<TimeSeriesDataset> {
    let here = Path::new("<reader>");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::ingestion(here, format!("bad header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match label_column {
        Some(col) => Some(headers.iter().position(|h| h == col).ok_or_else(|| {
            Error::ingestion(here, format!("label column '{col}' not in header"))
        })?),
        None => None,
    };
    let channel_idx: Vec<usize> = (0..headers.len())
        .filter(|i| Some(*i) != label_idx)
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (i, record) in rdr.records().enumerate() {
        // 1-based data row number, header excluded
        let row = i + 1;
        let record = record.map_err(|e| Error::ingestion(here, format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::ingestion(
                here,
                format!(
                    "row {row}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            ));
        }
        for &c in &channel_idx {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| {
                Error::ingestion(
                    here,
                    format!(
                        "row {row}, column '{}': non-numeric value '{cell}'",
                        headers[c]
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::ingestion(
                    here,
                    format!(
                        "row {row}, column '{}': non-finite value '{cell}'",
                        headers[c]
                    ),
                ));
            }
            values.push(v);
        }
        if let Some(l) = label_idx {
            let cell = record[l].trim();
            let y = match cell {
                "0" | "0.0" => 0u8,
                "1" | "1.0" => 1u8,
                _ => {
                    return Err(Error::ingestion(
                        here,
                        format!(
                            "row {row}, column '{}': label '{cell}' is not 0 or 1",
                            headers[l]
                        ),
                    ))
                }
            };
            labels.push(y);
        }
        rows += 1;
    }
    let matrix = Matrix::from_vec(rows, channel_idx.len(), values)?;
    let channel_names = channel_idx.iter().map(|&i| headers[i].clone()).collect();
    TimeSeriesDataset::with_channel_names(name, matrix, label_idx.map(|_| labels), channel_names)
}

/// Writes channels in order, then a `label` column when labels are present.
pub fn write_csv(ds: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

pub fn write_csv_to<W: Write>(ds: &TimeSeriesDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.channel_names.iter().map(String::as_str).collect();
    if ds.is_labeled() {
        header.push(DEFAULT_LABEL_COLUMN);
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..ds.len() {
        let mut rec: Vec<String> = ds.values().row(t).iter().map(|v| v.to_string()).collect();
        if let Some(y) = ds.labels() {
            rec.push(y[t].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
