//! CSV and JSON-lines helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use levelset_core::training::TrainingDataset;

use crate::error::{data_io, CliError, CliResult};

/// Points with optional 1-based labels.
#[derive(Debug, Clone, Default)]
pub struct PointTable {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

/// Reads a headed CSV of feature columns; a column named `label` holds
/// 1-based integer classes.
pub fn read_points(path: &Path) -> CliResult<PointTable> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let label_col = header.iter().position(|h| h.trim() == "label");
    let features = header.len() - label_col.is_some() as usize;
    if features == 0 && !header.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    let mut table = PointTable {
        points: Vec::new(),
        labels: label_col.map(|_| Vec::new()),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let bad =
            |what: &str| CliError::Data(format!("{} row {}: {what}", path.display(), row + 2));
        let mut p = Vec::with_capacity(features);
        for (i, field) in rec.iter().enumerate() {
            if Some(i) == label_col {
                let l: usize = field
                    .trim()
                    .parse()
                    .map_err(|_| bad("label is not a positive integer"))?;
                if l == 0 {
                    return Err(bad("labels are 1-based"));
                }
                table.labels.as_mut().expect("label column").push(l);
            } else {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| bad("feature is not a number"))?;
                if !v.is_finite() {
                    return Err(bad("feature is not finite"));
                }
                p.push(v);
            }
        }
        table.points.push(p);
    }
    Ok(table)
}

/// Builds a dataset from a labeled point table; `classes` defaults to the
/// largest label.
pub fn dataset(
    table: &PointTable,
    classes: Option<usize>,
    path: &Path,
) -> CliResult<TrainingDataset> {
    let labels = table.labels.as_ref().ok_or_else(|| {
        CliError::Data(format!("{}: dataset needs a label column", path.display()))
    })?;
    let k = classes.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
    if k < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least two classes",
            path.display()
        )));
    }
    let mut split: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    for (p, &l) in table.points.iter().zip(labels) {
        if l > k {
            return Err(CliError::Data(format!(
                "{}: label {l} exceeds {k} classes",
                path.display()
            )));
        }
        split[l - 1].push(p.clone());
    }
    Ok(TrainingDataset::new(split)?)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let f = File::open(path).map_err(data_io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(data_io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).map_err(data_io(path))?);
    for it in items {
        let line = serde_json::to_string(it).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(w, "{line}").map_err(data_io(path))?;
    }
    w.flush().map_err(data_io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(data_io(path))
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(data_io(path))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(data_io(dir))
}

/// Shortest round-trip text for a finite float.
pub fn num(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}
