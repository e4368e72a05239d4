use crate::fingerprint::Fingerprint;
use crate::impute::ImputedMatrix;
use crate::Scalar;

use super::ModelError;

/// Complete row-major feature table with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    labels: Vec<u8>,
    column_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, labels: Vec<u8>, column_names: Vec<String>) -> Result<Self, ModelError> {
        let d = column_names.len();
        if features.len() != labels.len() * d {
            return Err(ModelError::ShapeMismatch {
                expected: labels.len() * d,
                found: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row: i / d.max(1), col: i % d.max(1) });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(ModelError::BadLabel);
        }
        Ok(Dataset { features, labels, column_names })
    }

    pub fn from_imputed(m: &ImputedMatrix<T>) -> Self {
        Dataset {
            features: m.values.clone(),
            labels: m.labels.clone(),
            column_names: m.columns.iter().map(|c| c.name.clone()).collect(),
        }
    }

    /// Appends one 0/1 column per fingerprint bit, named `fp_<bit>`.
    pub fn with_fingerprints(&self, fps: &[Fingerprint]) -> Result<Self, ModelError> {
        let width = fps.first().map_or(0, Fingerprint::width);
        let rows: Vec<Vec<u8>> = fps
            .iter()
            .map(|fp| (0..fp.width()).map(|b| u8::from(fp.get(b))).collect())
            .collect();
        self.with_fingerprint_columns(&rows, width)
    }

    /// Appends `width` fingerprint columns, one row of small counts per
    /// stay, named `fp_<bit>`.
    pub fn with_fingerprint_columns(&self, rows: &[Vec<u8>], width: usize) -> Result<Self, ModelError> {
        if rows.len() != self.n_rows() {
            return Err(ModelError::ShapeMismatch {
                expected: self.n_rows(),
                found: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(ModelError::ShapeMismatch {
                expected: width,
                found: r.len(),
            });
        }
        let d = self.n_cols();
        let mut features = Vec::with_capacity(self.n_rows() * (d + width));
        for (r, bits) in rows.iter().enumerate() {
            features.extend_from_slice(self.row(r));
            features.extend(bits.iter().map(|&b| T::of(b as f64)));
        }
        let mut column_names = self.column_names.clone();
        column_names.extend((0..width).map(|b| format!("fp_{b}")));
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            column_names,
        })
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let d = self.n_cols();
        &self.features[r * d..(r + 1) * d]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.features[r * self.n_cols() + c]
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub(crate) fn check_both_classes(&self) -> Result<(), ModelError> {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        if pos == 0 || pos == self.labels.len() {
            return Err(ModelError::DegenerateLabels);
        }
        Ok(())
    }
}
