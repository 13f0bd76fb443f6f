//! Time-series tables and their sample correlation matrices.

use std::path::Path;

use corrgeom::{validate, CorrelationMatrix, ValidationTolerances};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Columns whose sample variance falls below this are treated as constant.
pub const ZERO_VARIANCE: f64 = 1e-12;

/// `T×m` observations, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    pub subject_id: String,
    pub column_names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl TimeSeriesTable {
    pub fn new(
        subject_id: impl Into<String>,
        column_names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if column_names.len() != values.ncols() {
            return Err(PipelineError::DegenerateInput(format!(
                "{} column names for {} columns",
                column_names.len(),
                values.ncols()
            )));
        }
        if values.nrows() < 2 {
            return Err(PipelineError::DegenerateInput(
                "need at least two timepoints".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::DegenerateInput(
                "table has non-finite entries".into(),
            ));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            column_names,
            values,
        })
    }

    pub fn timepoints(&self) -> usize {
        self.values.nrows()
    }

    /// Sample variance of every column.
    pub fn variances(&self) -> Vec<f64> {
        let t = self.values.nrows() as f64;
        self.values
            .column_iter()
            .map(|c| {
                let mean = c.mean();
                c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0)
            })
            .collect()
    }

    /// Names of columns with variance below [`ZERO_VARIANCE`].
    pub fn zero_variance_columns(&self) -> Vec<String> {
        self.variances()
            .iter()
            .zip(&self.column_names)
            .filter(|(v, _)| **v < ZERO_VARIANCE)
            .map(|(_, n)| n.clone())
            .collect()
    }
}

/// Reads a CSV with a header row of variable names and one row per
/// timepoint.
pub fn ingest(path: &Path, subject_id: &str) -> Result<TimeSeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| PipelineError::Parse {
                path: path.to_path_buf(),
                line,
                column: names[j].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(PipelineError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: names[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(PipelineError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let values = DMatrix::from_row_slice(rows, names.len(), &data);
    TimeSeriesTable::new(subject_id, names, values)
}

fn csv_error(path: &Path, e: csv::Error) -> PipelineError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => PipelineError::io(path, source),
        other => PipelineError::Parse {
            path: path.to_path_buf(),
            line,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Zero-variance handling for ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DropPolicy {
    /// Subjects with more constant columns than this are excluded from the
    /// cohort; `None` keeps every subject.
    pub max_zero_variance: Option<usize>,
}

/// A correlation matrix together with the columns it covers.
#[derive(Debug, Clone)]
pub struct SubjectCorrelation {
    pub matrix: CorrelationMatrix,
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
}

/// Sample correlation of `columns` (all non-constant columns when `None`).
pub fn correlation_of(
    ts: &TimeSeriesTable,
    columns: Option<&[String]>,
) -> Result<SubjectCorrelation> {
    let variances = ts.variances();
    let wanted = |name: &String| columns.is_none_or(|c| c.contains(name));
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut idx = Vec::new();
    for (j, name) in ts.column_names.iter().enumerate() {
        if !wanted(name) {
            continue;
        }
        if variances[j] < ZERO_VARIANCE {
            dropped.push(name.clone());
        } else {
            kept.push(name.clone());
            idx.push(j);
        }
    }
    if idx.is_empty() {
        return Err(PipelineError::DegenerateInput(format!(
            "subject {}: every column was dropped",
            ts.subject_id
        )));
    }
    let t = ts.timepoints();
    let mut centered = DMatrix::zeros(t, idx.len());
    for (c, &j) in idx.iter().enumerate() {
        let col = ts.values.column(j);
        let mean = col.mean();
        let sd = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
        centered.set_column(c, &col.map(|v| (v - mean) / sd));
    }
    let g = centered.transpose() * &centered;
    let mut z = (&g + g.transpose()) * 0.5;
    z.fill_diagonal(1.0);
    z.apply(|v| *v = v.clamp(-1.0, 1.0));
    let matrix = validate(&z, &ValidationTolerances::default()).map_err(|v| {
        PipelineError::Validation(format!(
            "subject {}: {}",
            ts.subject_id,
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        ))
    })?;
    Ok(SubjectCorrelation {
        matrix,
        kept,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingests_small_table() {
        let f = write("a,b\n1,2\n3,5\n4,4\n");
        let t = ingest(f.path(), "s").unwrap();
        assert_eq!(t.values.shape(), (3, 2));
        assert_eq!(t.column_names, vec!["a", "b"]);
    }

    #[test]
    fn nan_cell_names_location() {
        let f = write("a,b\n1,2\n3,NaN\n");
        match ingest(f.path(), "s") {
            Err(PipelineError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let f = write("a,b\n");
        assert!(matches!(
            ingest(f.path(), "s"),
            Err(PipelineError::EmptyFile { .. })
        ));
    }

    #[test]
    fn correlated_and_constant_columns() {
        let values = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 7.0, 2.0, 4.0, 7.0, 3.0, 6.0, 7.0, 5.0, 10.0, 7.0],
        );
        let t =
            TimeSeriesTable::new("s", vec!["a".into(), "b".into(), "c".into()], values).unwrap();
        let c = correlation_of(&t, None).unwrap();
        assert_eq!(c.kept, vec!["a", "b"]);
        assert_eq!(c.dropped, vec!["c"]);
        assert!((c.matrix.entries()[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_constant_is_degenerate() {
        let t =
            TimeSeriesTable::new("s", vec!["a".into()], DMatrix::from_element(3, 1, 2.0)).unwrap();
        assert!(matches!(
            correlation_of(&t, None),
            Err(PipelineError::DegenerateInput(_))
        ));
    }
}
