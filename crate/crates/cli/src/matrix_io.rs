//! Labelled matrix CSV files.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{PipelineError, Result};

/// Scientific notation with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header row `"",labels…`, then one row per label followed by its values.
pub fn matrix_to_csv(labels: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str(&csv_row(
        std::iter::once(String::new()).chain(labels.iter().cloned()),
    ));
    for i in 0..m.nrows() {
        let label = labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let row = m.row(i);
        let cells = std::iter::once(label).chain(row.iter().map(|v| format_value(*v)));
        out.push_str(&csv_row(cells));
    }
    out
}

/// Unlabelled matrix with a plain numeric body.
pub fn plain_matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        out.push_str(&csv_row(row.iter().map(|v| format_value(*v))));
    }
    out
}

fn csv_row(cells: impl Iterator<Item = String>) -> String {
    let mut line = String::new();
    for (i, c) in cells.enumerate() {
        if i > 0 {
            line.push(',');
        }
        if c.contains([',', '"', '\n']) {
            let _ = write!(line, "\"{}\"", c.replace('"', "\"\""));
        } else {
            line.push_str(&c);
        }
    }
    line.push('\n');
    line
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// A matrix read from CSV, with labels when the file had them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub labels: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

/// Reads a numeric matrix, accepting an optional header row and an
/// optional leading label column.
pub fn read_matrix(path: &Path) -> Result<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => PipelineError::io(path, source),
            other => PipelineError::Parse {
                path: path.to_path_buf(),
                line: 0,
                column: String::new(),
                message: format!("{other:?}"),
            },
        })?;
    let mut records = Vec::new();
    for r in reader.records() {
        let r = r.map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = r.position().map_or(0, |p| p.line());
        records.push((line, r.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let mut header = None;
    if let Some((_, first)) = records.first() {
        if first.iter().any(|c| !numeric(c)) {
            header = Some(records.remove(0).1);
        }
    }
    if records.is_empty() {
        return Err(PipelineError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let indexed = records
        .iter()
        .any(|(_, r)| r.first().is_some_and(|c| !numeric(c)));
    let mut data = Vec::new();
    let mut row_labels = Vec::new();
    let mut width = None;
    for (line, r) in &records {
        let cells = if indexed {
            row_labels.push(r[0].clone());
            &r[1..]
        } else {
            &r[..]
        };
        if *width.get_or_insert(cells.len()) != cells.len() {
            return Err(PipelineError::Parse {
                path: path.to_path_buf(),
                line: *line,
                column: String::new(),
                message: "ragged row".into(),
            });
        }
        for (j, c) in cells.iter().enumerate() {
            let v: f64 = c
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| PipelineError::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    column: (j + 1).to_string(),
                    message: format!("not a finite number: {c:?}"),
                })?;
            data.push(v);
        }
    }
    let cols = width.unwrap_or(0);
    let values = DMatrix::from_row_slice(records.len(), cols, &data);
    let labels = match header {
        Some(h) if indexed || h.len() == cols + 1 => Some(h[1..].to_vec()),
        Some(h) => Some(h),
        None if indexed => Some(row_labels),
        None => None,
    };
    Ok(LabeledMatrix { labels, values })
}
