//! Plain-text matrix files: comma-separated, one row per line.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Parses a numeric CSV. With `header`, the first row is skipped.
pub fn parse_matrix_csv(text: &str, header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse(format!("row {} has {} fields, expected {c}", r + 1, record.len())))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: not a number: {field:?}", r + 1)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite value", r + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix_csv(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text, header)
}

/// Writes values with full round-trip precision.
pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writer.write_record(&fields).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("ascii output")
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix_csv(m)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
