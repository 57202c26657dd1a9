//! CSV ingestion.
//!
//! Files are UTF-8, comma separated and start with a header row. By default
//! the outcome is column `y`, the running variable column `x`, and the
//! covariates are `z1, z2, …` (consecutive, starting at 1). Line numbers in
//! error messages count the header as line 1.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::local_fit::Dataset;

/// Which CSV columns hold the outcome, the running variable and the
/// covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub y: String,
    pub x: String,
    /// Explicit covariate columns; `None` picks up `z1..zp`.
    pub z: Option<Vec<String>>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            y: "y".into(),
            x: "x".into(),
            z: None,
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, columns: &ColumnMap, cutoff: f64) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    ingest_reader(file, columns, cutoff)
}

pub fn ingest_reader<R: Read>(reader: R, columns: &ColumnMap, cutoff: f64) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| ingest_error(1, "<header>", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(ingest_error(1, "<header>", "missing header row".into()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest_error(1, name, "required column not found in header".into()))
    };
    let iy = find(&columns.y)?;
    let ix = find(&columns.x)?;
    let z_names = match &columns.z {
        Some(names) => names.clone(),
        None => covariate_columns(&header)?,
    };
    let iz = z_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z: Vec<f64> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| ingest_error(line, "<row>", e.to_string()))?;
        if record.len() != header.len() {
            return Err(ingest_error(
                line,
                "<row>",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let cell = |i: usize| -> Result<f64> {
            let raw = &record[i];
            let v: f64 = raw
                .parse()
                .map_err(|_| ingest_error(line, &header[i], format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(ingest_error(line, &header[i], format!("`{raw}` is not finite")));
            }
            Ok(v)
        };
        y.push(cell(iy)?);
        x.push(cell(ix)?);
        for &i in &iz {
            z.push(cell(i)?);
        }
    }
    if y.is_empty() {
        return Err(Error::InvalidData("no data rows after the header".into()));
    }
    let n = y.len();
    let z = DMatrix::from_row_slice(n, iz.len(), &z);
    Dataset::new(y, x, z, cutoff)
}

/// Columns named `z1, z2, …` in numeric order; gaps are an error.
fn covariate_columns(header: &[String]) -> Result<Vec<String>> {
    let mut idx: Vec<usize> = header
        .iter()
        .filter_map(|h| h.strip_prefix('z').and_then(|d| d.parse::<usize>().ok()))
        .collect();
    idx.sort_unstable();
    for (expect, &got) in (1..).zip(&idx) {
        if got != expect {
            return Err(ingest_error(
                1,
                &format!("z{expect}"),
                "covariate columns must be numbered consecutively from z1".into(),
            ));
        }
    }
    Ok(idx.iter().map(|k| format!("z{k}")).collect())
}

fn ingest_error(line: usize, column: &str, message: String) -> Error {
    Error::Ingest {
        line,
        column: column.to_string(),
        message,
    }
}
