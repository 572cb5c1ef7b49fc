//! CSV and JSON files.
//!
//! Matrices are comma-separated decimals, one row per line, with no header
//! unless asked for. Floats are written in Rust's shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;
use vmfkit::cluster::LabelVector;
use vmfkit::vmf::Dataset;

use crate::error::{CliError, CliResult};

fn reader(path: &Path, header: bool) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::parse(path, format!("{other:?}")),
        }
    } else {
        CliError::parse(path, e)
    }
}

/// Reads a numeric matrix.
pub fn read_matrix(path: &Path, header: bool) -> CliResult<Array2<f64>> {
    let mut rdr = reader(path, header)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 1 + usize::from(header);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(CliError::parse(
                    path,
                    format!("line {line}: expected {c} fields, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::parse(path, format!("line {line}: not a number: {field:?}"))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::parse(path, "no data rows"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| CliError::parse(path, e))
}

/// Reads unit vectors, renormalizing each row if `normalize` is set.
pub fn read_dataset(path: &Path, header: bool, normalize: bool) -> CliResult<Dataset> {
    let m = read_matrix(path, header)?;
    let data = if normalize {
        Dataset::normalized(m)
    } else {
        Dataset::new(m)
    };
    data.map_err(|e| CliError::parse(path, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>, header: bool) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    if header {
        let names: Vec<String> = (0..m.ncols()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", names.join(",")).map_err(io)?;
    }
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", fields.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One integer label per line; any integer ids, densified in order of appearance.
pub fn read_labels(path: &Path, header: bool) -> CliResult<LabelVector> {
    let mut rdr = reader(path, header)?;
    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 1 + usize::from(header);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 1 {
            return Err(CliError::parse(
                path,
                format!("line {line}: expected one label"),
            ));
        }
        let v: i64 = rec[0].parse().map_err(|_| {
            CliError::parse(path, format!("line {line}: not an integer: {:?}", &rec[0]))
        })?;
        raw.push(v);
    }
    if raw.is_empty() {
        return Err(CliError::parse(path, "no labels"));
    }
    Ok(LabelVector::from_raw(&raw))
}

pub fn write_labels(path: &Path, labels: &LabelVector, header: bool) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    if header {
        writeln!(w, "label").map_err(io)?;
    }
    for l in labels.labels() {
        writeln!(w, "{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
        if e.is_io() {
            CliError::io(path, e.into())
        } else {
            CliError::parse(path, e)
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    w.write_all(text.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> CliResult<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
