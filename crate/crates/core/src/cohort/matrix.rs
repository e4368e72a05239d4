//! Stay-indexed feature table with per-cell missingness.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub const ID_COLUMN: &str = "stay_id";
pub const LABEL_COLUMN: &str = "aki_label";

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("{0}")]
    Shape(String),
    #[error("label {label} in row {row} is not 0 or 1")]
    BadLabel { row: usize, label: u8 },
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column:?}: cannot parse {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("header does not match the manifest: {0}")]
    Header(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

pub(crate) fn check_unique(columns: &[Column]) -> Result<(), MatrixError> {
    let mut seen = HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) || c.name == ID_COLUMN || c.name == LABEL_COLUMN {
            return Err(MatrixError::DuplicateColumn(c.name.clone()));
        }
    }
    Ok(())
}

/// Row-major table of optional values; `None` marks a missing cell, so the
/// mask and the values cannot disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    columns: Vec<Column>,
    row_ids: Vec<String>,
    cells: Vec<Option<T>>,
    labels: Vec<u8>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(
        columns: Vec<Column>,
        row_ids: Vec<String>,
        cells: Vec<Option<T>>,
        labels: Vec<u8>,
    ) -> Result<Self, MatrixError> {
        check_unique(&columns)?;
        if row_ids.len() != labels.len() || cells.len() != row_ids.len() * columns.len() {
            return Err(MatrixError::Shape(format!(
                "{} ids, {} labels, {} cells for {} columns",
                row_ids.len(),
                labels.len(),
                cells.len(),
                columns.len()
            )));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
            return Err(MatrixError::BadLabel { row, label });
        }
        Ok(FeatureMatrix {
            columns,
            row_ids,
            cells,
            labels,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.cells[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<T>] {
        let w = self.columns.len();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn missing_count(&self, col: usize) -> usize {
        (0..self.n_rows()).filter(|&r| self.get(r, col).is_none()).count()
    }

    pub fn missing_fraction(&self, col: usize) -> f64 {
        if self.n_rows() == 0 {
            0.0
        } else {
            self.missing_count(col) as f64 / self.n_rows() as f64
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let columns = keep.iter().map(|&c| self.columns[c].clone()).collect();
        let cells = (0..self.n_rows())
            .flat_map(|r| keep.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        FeatureMatrix {
            columns,
            row_ids: self.row_ids.clone(),
            cells,
            labels: self.labels.clone(),
        }
    }

    /// CSV with a `stay_id` column first and `aki_label` last; missing cells
    /// are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![ID_COLUMN.to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.push(LABEL_COLUMN.to_string());
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.row_ids[r].clone());
            rec.extend(self.row(r).iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
            rec.push(self.labels[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv); column kinds
    /// come from the manifest.
    pub fn read_csv<R: Read>(input: R, columns: &[Column]) -> Result<Self, MatrixError> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        check_header(&header, columns)?;
        let (mut ids, mut cells, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            for (c, col) in columns.iter().enumerate() {
                let raw = &rec[c + 1];
                cells.push(if raw.is_empty() {
                    None
                } else {
                    Some(parse_cell::<T>(raw, row, &col.name)?)
                });
            }
            let raw = &rec[columns.len() + 1];
            labels.push(raw.parse::<u8>().map_err(|_| MatrixError::Parse {
                row,
                column: LABEL_COLUMN.into(),
                value: raw.into(),
            })?);
        }
        Self::new(columns.to_vec(), ids, cells, labels)
    }
}

pub(crate) fn check_header(header: &csv::StringRecord, columns: &[Column]) -> Result<(), MatrixError> {
    let expected: Vec<&str> = std::iter::once(ID_COLUMN)
        .chain(columns.iter().map(|c| c.name.as_str()))
        .chain(std::iter::once(LABEL_COLUMN))
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(MatrixError::Header(format!(
            "expected {} columns starting {:?}, found {} starting {:?}",
            expected.len(),
            &expected[..expected.len().min(3)],
            found.len(),
            &found[..found.len().min(3)]
        )));
    }
    Ok(())
}

pub(crate) fn parse_cell<T: Scalar>(raw: &str, row: usize, column: &str) -> Result<T, MatrixError> {
    raw.parse::<T>().map_err(|_| MatrixError::Parse {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}
