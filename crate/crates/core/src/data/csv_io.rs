//! CSV ingestion and egress with an `NA` missing sentinel.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MISSING_TOKEN: &str = "NA";

/// Column kinds by name; unlisted columns are continuous.
pub type Schema = HashMap<String, ColumnKind>;

pub fn load_csv<S: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<S>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_owned()),
        other => other,
    })
}

/// Parses a header-first CSV stream; empty fields and `NA` are missing.
pub fn read_csv<S: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<Dataset<S>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(Default::default()));
    }
    if let Some(unknown) = schema.keys().find(|k| !headers.contains(k)) {
        return Err(Error::UnknownColumn(unknown.clone()));
    }
    let mut cells: Vec<Vec<Option<S>>> = vec![Vec::new(); headers.len()];
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let cell = if field.is_empty() || field == MISSING_TOKEN {
                None
            } else {
                let v: S = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse `{field}` in column `{}`", headers[col]),
                })?;
                Some(v)
            };
            cells[col].push(cell);
        }
    }
    let columns = headers
        .iter()
        .zip(&cells)
        .map(|(name, col)| {
            let kind = schema.get(name).copied().unwrap_or_default();
            Column::from_options(name.clone(), kind, col)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(columns)
}

pub fn write_csv<S: Scalar>(data: &Dataset<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(data, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes with the shortest decimal that re-parses to the identical value
/// (at most 17 significant digits for `f64`).
pub fn write_csv_to<S: Scalar, W: Write>(data: &Dataset<S>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    w.write_record(data.names()).map_err(to_io)?;
    for row in 0..data.n_rows() {
        let record: Vec<String> = data
            .columns()
            .iter()
            .map(|c| c.get(row).map_or_else(|| MISSING_TOKEN.to_owned(), |v| v.to_string()))
            .collect();
        w.write_record(&record).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
