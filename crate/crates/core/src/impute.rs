//! Missing-value handling: drop sparse columns, then fill the rest by
//! chained equations.
//!
//! Each sweep regresses one incomplete column on all others (ridge linear
//! regression for continuous columns, ridge logistic regression fitted by
//! iteratively reweighted least squares for binary ones) using the rows
//! where that column is observed, and overwrites only its missing cells
//! with the predicted value. This is the deterministic predictive-mean
//! variant: no posterior draws and a single completed table.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::matrix::{check_header, parse_cell, Column, ColumnKind, FeatureMatrix, MatrixError, ID_COLUMN};
use crate::linalg::cholesky_solve;
use crate::Scalar;

const LOGISTIC_MAX_ITER: usize = 25;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("invalid imputation config: {0}")]
    Config(String),
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("every column exceeds the missingness threshold")]
    AllColumnsDropped,
    #[error("column {0:?} has fewer than two observed values")]
    TooFewObserved(String),
    #[error("row {0} has no observed values")]
    EmptyRow(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    /// Columns missing in strictly more than this fraction of rows are dropped.
    pub drop_threshold: f64,
    pub cycles: usize,
    pub ridge_lambda: f64,
    /// Kept for configuration compatibility; the predictive-mean variant
    /// draws no random numbers.
    pub seed: u64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            drop_threshold: 0.20,
            cycles: 10,
            ridge_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return Err(ImputeError::Config("drop_threshold must be in (0, 1)".into()));
        }
        if self.cycles < 1 {
            return Err(ImputeError::Config("cycles must be >= 1".into()));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(ImputeError::Config("ridge_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub missing_fraction: f64,
}

/// Removes columns whose missing fraction is strictly above the threshold.
pub fn drop_high_missing<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    cfg: &ImputeConfig,
) -> Result<(FeatureMatrix<T>, Vec<DroppedColumn>), ImputeError> {
    cfg.validate()?;
    if matrix.n_rows() == 0 {
        return Err(ImputeError::EmptyMatrix);
    }
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (c, col) in matrix.columns().iter().enumerate() {
        let frac = matrix.missing_fraction(c);
        if frac > cfg.drop_threshold {
            dropped.push(DroppedColumn {
                name: col.name.clone(),
                missing_fraction: frac,
            });
        } else {
            keep.push(c);
        }
    }
    if keep.is_empty() && matrix.n_cols() > 0 {
        return Err(ImputeError::AllColumnsDropped);
    }
    Ok((matrix.select_columns(&keep), dropped))
}

/// A complete table plus which cells were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMatrix<T> {
    pub columns: Vec<Column>,
    pub row_ids: Vec<String>,
    /// Row-major, no missing cells.
    pub values: Vec<T>,
    /// Row-major, `true` where the value was imputed.
    pub imputed: Vec<bool>,
    pub labels: Vec<u8>,
    pub dropped_columns: Vec<DroppedColumn>,
    /// `(column name, cycle)` pairs where the regression was singular and the
    /// column mean was used instead.
    pub mean_fallbacks: Vec<(String, usize)>,
}

impl<T: Scalar> ImputedMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.columns.len() + col]
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MatrixError> {
        let cells: Vec<Option<T>> = self.values.iter().map(|&v| Some(v)).collect();
        FeatureMatrix::new(self.columns.clone(), self.row_ids.clone(), cells, self.labels.clone())?
            .write_csv(out)
    }

    /// `stay_id` followed by one 0/1 flag per column (1 = imputed).
    pub fn write_provenance_csv<W: Write>(&self, out: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![ID_COLUMN.to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        let width = self.columns.len();
        for (r, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(
                self.imputed[r * width..(r + 1) * width]
                    .iter()
                    .map(|&f| if f { "1" } else { "0" }.to_string()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a completed table and its provenance flags back.
    pub fn read_csv<R: std::io::Read, P: std::io::Read>(
        values: R,
        provenance: P,
        columns: &[Column],
        dropped_columns: Vec<DroppedColumn>,
    ) -> Result<Self, MatrixError> {
        let m = FeatureMatrix::<T>::read_csv(values, columns)?;
        let mut vals = Vec::with_capacity(m.n_rows() * columns.len());
        for r in 0..m.n_rows() {
            for (c, v) in m.row(r).iter().enumerate() {
                vals.push(v.ok_or_else(|| MatrixError::Parse {
                    row: r,
                    column: columns[c].name.clone(),
                    value: String::new(),
                })?);
            }
        }
        let mut rdr = csv::Reader::from_reader(provenance);
        let mut header = rdr.headers()?.clone();
        header.push_field(crate::cohort::matrix::LABEL_COLUMN);
        check_header(&header, columns)?;
        let mut imputed = Vec::with_capacity(vals.len());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for c in 0..columns.len() {
                imputed.push(parse_cell::<f64>(&rec[c + 1], row, &columns[c].name)? != 0.0);
            }
        }
        if imputed.len() != vals.len() {
            return Err(MatrixError::Shape("provenance rows differ from values".into()));
        }
        Ok(ImputedMatrix {
            columns: columns.to_vec(),
            row_ids: m.row_ids().to_vec(),
            values: vals,
            imputed,
            labels: m.labels().to_vec(),
            dropped_columns,
            mean_fallbacks: Vec::new(),
        })
    }
}

fn column_mean<T: Scalar>(values: &[T], rows: &[usize], width: usize, col: usize) -> T {
    let sum: T = rows.iter().map(|&r| values[r * width + col]).sum();
    sum / T::of(rows.len() as f64)
}

/// Observed mode of a 0/1 column; ties go to 0.
fn column_mode<T: Scalar>(values: &[T], rows: &[usize], width: usize, col: usize) -> T {
    let ones = rows.iter().filter(|&&r| values[r * width + col] > T::of(0.5)).count();
    if 2 * ones > rows.len() {
        T::one()
    } else {
        T::zero()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Standardized predictor block over the training rows.
struct Design<T> {
    // predictor column indices with non-zero spread
    cols: Vec<usize>,
    mean: Vec<T>,
    sd: Vec<T>,
}

impl<T: Scalar> Design<T> {
    fn new(values: &[T], width: usize, target: usize, rows: &[usize]) -> Self {
        let n = T::of(rows.len() as f64);
        let (mut cols, mut mean, mut sd) = (Vec::new(), Vec::new(), Vec::new());
        for c in (0..width).filter(|&c| c != target) {
            let m: T = rows.iter().map(|&r| values[r * width + c]).sum::<T>() / n;
            let var: T = rows
                .iter()
                .map(|&r| {
                    let d = values[r * width + c] - m;
                    d * d
                })
                .sum::<T>()
                / n;
            let s = var.sqrt();
            if s > T::epsilon() * (T::one() + m.abs()) {
                cols.push(c);
                mean.push(m);
                sd.push(s);
            }
        }
        Design { cols, mean, sd }
    }

    fn row(&self, values: &[T], width: usize, r: usize, out: &mut [T]) {
        for (k, &c) in self.cols.iter().enumerate() {
            out[k] = (values[r * width + c] - self.mean[k]) / self.sd[k];
        }
    }
}

/// Ridge regression on standardized predictors with an unpenalized
/// intercept. Returns `(intercept, coefficients)`.
fn fit_linear<T: Scalar>(
    values: &[T],
    width: usize,
    target: usize,
    rows: &[usize],
    design: &Design<T>,
    lambda: T,
) -> Option<(T, Vec<T>)> {
    let p = design.cols.len();
    let n = T::of(rows.len() as f64);
    let y_mean: T = rows.iter().map(|&r| values[r * width + target]).sum::<T>() / n;
    if p == 0 {
        return Some((y_mean, Vec::new()));
    }
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p];
    let mut z = vec![T::zero(); p];
    for &r in rows {
        design.row(values, width, r, &mut z);
        let y = values[r * width + target] - y_mean;
        for i in 0..p {
            rhs[i] = rhs[i] + z[i] * y;
            for j in 0..=i {
                gram[i * p + j] = gram[i * p + j] + z[i] * z[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j * p + i] = gram[i * p + j];
        }
        gram[i * p + i] = gram[i * p + i] + lambda;
    }
    let beta = cholesky_solve(&gram, &rhs, p)?;
    // predictors are centred, so the intercept is the target mean
    Some((y_mean, beta))
}

/// Ridge logistic regression by IRLS; the intercept is unpenalized.
fn fit_logistic<T: Scalar>(
    values: &[T],
    width: usize,
    target: usize,
    rows: &[usize],
    design: &Design<T>,
    lambda: T,
) -> Option<(T, Vec<T>)> {
    let p = design.cols.len() + 1;
    let mut theta = vec![T::zero(); p];
    let mut z = vec![T::zero(); p - 1];
    let w_floor = T::of(1e-10);
    for _ in 0..LOGISTIC_MAX_ITER {
        let mut hess = vec![T::zero(); p * p];
        let mut grad = vec![T::zero(); p];
        for &r in rows {
            design.row(values, width, r, &mut z);
            let eta = theta[0] + z.iter().zip(&theta[1..]).map(|(&a, &b)| a * b).sum::<T>();
            let prob = sigmoid(eta);
            let w = (prob * (T::one() - prob)).max(w_floor);
            let resid = values[r * width + target] - prob;
            let x = |i: usize| if i == 0 { T::one() } else { z[i - 1] };
            for i in 0..p {
                let xi = x(i);
                grad[i] = grad[i] + xi * resid;
                for j in 0..=i {
                    hess[i * p + j] = hess[i * p + j] + w * xi * x(j);
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                hess[j * p + i] = hess[i * p + j];
            }
            if i > 0 {
                hess[i * p + i] = hess[i * p + i] + lambda;
                grad[i] = grad[i] - lambda * theta[i];
            }
        }
        let step = cholesky_solve(&hess, &grad, p)?;
        let mut largest = T::zero();
        for (t, s) in theta.iter_mut().zip(&step) {
            *t = *t + *s;
            largest = largest.max(s.abs());
        }
        if largest < T::of(1e-8) {
            break;
        }
    }
    Some((theta[0], theta[1..].to_vec()))
}

/// Fills every missing cell by chained-equation regression sweeps.
pub fn mice<T: Scalar>(matrix: &FeatureMatrix<T>, cfg: &ImputeConfig) -> Result<ImputedMatrix<T>, ImputeError> {
    cfg.validate()?;
    let (n, width) = (matrix.n_rows(), matrix.n_cols());
    if n == 0 {
        return Err(ImputeError::EmptyMatrix);
    }
    let mut observed_rows: Vec<Vec<usize>> = vec![Vec::new(); width];
    let mut missing_rows: Vec<Vec<usize>> = vec![Vec::new(); width];
    let mut imputed = vec![false; n * width];
    for r in 0..n {
        if width > 0 && matrix.row(r).iter().all(Option::is_none) {
            return Err(ImputeError::EmptyRow(r));
        }
        for c in 0..width {
            if matrix.get(r, c).is_some() {
                observed_rows[c].push(r);
            } else {
                missing_rows[c].push(r);
                imputed[r * width + c] = true;
            }
        }
    }
    for (c, col) in matrix.columns().iter().enumerate() {
        if observed_rows[c].len() < 2 {
            return Err(ImputeError::TooFewObserved(col.name.clone()));
        }
    }

    let mut values: Vec<T> = (0..n * width)
        .map(|i| matrix.get(i / width, i % width).unwrap_or_else(T::zero))
        .collect();
    let mut fill = vec![T::zero(); width];
    for (c, col) in matrix.columns().iter().enumerate() {
        fill[c] = match col.kind {
            ColumnKind::Continuous => column_mean(&values, &observed_rows[c], width, c),
            ColumnKind::Binary => column_mode(&values, &observed_rows[c], width, c),
        };
        for &r in &missing_rows[c] {
            values[r * width + c] = fill[c];
        }
    }

    let mut order: Vec<usize> = (0..width).filter(|&c| !missing_rows[c].is_empty()).collect();
    order.sort_by_key(|&c| (missing_rows[c].len(), c));
    let lambda = T::of(cfg.ridge_lambda);
    let mut mean_fallbacks = Vec::new();
    let mut z = vec![T::zero(); width];

    for cycle in 0..cfg.cycles {
        for &target in &order {
            let rows = &observed_rows[target];
            let design = Design::new(&values, width, target, rows);
            let kind = matrix.columns()[target].kind;
            let fit = match kind {
                ColumnKind::Continuous => fit_linear(&values, width, target, rows, &design, lambda),
                ColumnKind::Binary => fit_logistic(&values, width, target, rows, &design, lambda),
            };
            let Some((intercept, beta)) = fit else {
                log::warn!(
                    "singular system imputing {:?} in cycle {cycle}; using the column mean",
                    matrix.columns()[target].name
                );
                mean_fallbacks.push((matrix.columns()[target].name.clone(), cycle));
                for &r in &missing_rows[target] {
                    values[r * width + target] = fill[target];
                }
                continue;
            };
            let predictions: Vec<T> = missing_rows[target]
                .iter()
                .map(|&r| {
                    design.row(&values, width, r, &mut z);
                    let eta = intercept + z.iter().zip(&beta).map(|(&a, &b)| a * b).sum::<T>();
                    match kind {
                        ColumnKind::Continuous => eta,
                        ColumnKind::Binary if sigmoid(eta) >= T::of(0.5) => T::one(),
                        ColumnKind::Binary => T::zero(),
                    }
                })
                .collect();
            for (&r, v) in missing_rows[target].iter().zip(predictions) {
                values[r * width + target] = v;
            }
        }
    }

    Ok(ImputedMatrix {
        columns: matrix.columns().to_vec(),
        row_ids: matrix.row_ids().to_vec(),
        values,
        imputed,
        labels: matrix.labels().to_vec(),
        dropped_columns: Vec::new(),
        mean_fallbacks,
    })
}

/// Threshold cut followed by chained-equation imputation.
pub fn drop_and_impute<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    cfg: &ImputeConfig,
) -> Result<ImputedMatrix<T>, ImputeError> {
    let (reduced, dropped) = drop_high_missing(matrix, cfg)?;
    let mut out = mice(&reduced, cfg)?;
    out.dropped_columns = dropped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: &[(&str, ColumnKind)], rows: Vec<Vec<Option<f64>>>) -> FeatureMatrix<f64> {
        let n = rows.len();
        FeatureMatrix::new(
            cols.iter().map(|(n, k)| Column::new(*n, *k)).collect(),
            (0..n).map(|i| format!("s{i}")).collect(),
            rows.into_iter().flatten().collect(),
            vec![0; n],
        )
        .unwrap()
    }

    fn with_missing(n: usize, missing: usize) -> Vec<Option<f64>> {
        (0..n).map(|i| if i < missing { None } else { Some(i as f64) }).collect()
    }

    #[test]
    fn threshold_is_strict() {
        let c21 = with_missing(100, 21);
        let c20 = with_missing(100, 20);
        let full = with_missing(100, 0);
        let rows = (0..100).map(|i| vec![c21[i], c20[i], full[i]]).collect();
        let m = matrix(
            &[("c21", ColumnKind::Continuous), ("c20", ColumnKind::Continuous), ("full", ColumnKind::Continuous)],
            rows,
        );
        let (kept, dropped) = drop_high_missing(&m, &ImputeConfig::default()).unwrap();
        let names: Vec<_> = kept.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["c20", "full"]);
        assert_eq!(dropped, vec![DroppedColumn { name: "c21".into(), missing_fraction: 0.21 }]);
    }

    #[test]
    fn all_dropped_is_an_error() {
        let m = matrix(&[("a", ColumnKind::Continuous)], vec![vec![None], vec![Some(1.0)]]);
        assert!(matches!(
            drop_high_missing(&m, &ImputeConfig::default()),
            Err(ImputeError::AllColumnsDropped)
        ));
    }

    #[test]
    fn complete_columns_untouched_and_constants_filled() {
        let rows = (0..20)
            .map(|i| {
                vec![
                    Some(i as f64 * 0.5),
                    if i % 4 == 0 { None } else { Some(7.25) },
                ]
            })
            .collect();
        let m = matrix(&[("x", ColumnKind::Continuous), ("k", ColumnKind::Continuous)], rows);
        let out = mice(&m, &ImputeConfig::default()).unwrap();
        for r in 0..20 {
            assert_eq!(out.get(r, 0), r as f64 * 0.5);
            assert!((out.get(r, 1) - 7.25).abs() < 1e-12);
        }
        assert!(out.imputed[1] && !out.imputed[0]);
    }

    #[test]
    fn recovers_linear_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let rows = (0..200)
            .map(|i| vec![Some(x[i]), if rng.random_bool(0.3) { None } else { Some(y[i]) }])
            .collect();
        let m = matrix(&[("x", ColumnKind::Continuous), ("y", ColumnKind::Continuous)], rows);
        let out = mice(&m, &ImputeConfig::default()).unwrap();
        for r in 0..200 {
            assert!((out.get(r, 1) - y[r]).abs() < 1e-3);
        }
    }

    #[test]
    fn binary_column_from_logistic_fit() {
        let rows = (0..60)
            .map(|i| {
                let x = i as f64;
                let b = if x >= 30.0 { 1.0 } else { 0.0 };
                vec![Some(x), if i % 5 == 2 { None } else { Some(b) }]
            })
            .collect();
        let m = matrix(&[("x", ColumnKind::Continuous), ("b", ColumnKind::Binary)], rows);
        let out = mice(&m, &ImputeConfig::default()).unwrap();
        for r in (0..60).filter(|r| r % 5 == 2) {
            let expect = if r >= 30 { 1.0 } else { 0.0 };
            assert_eq!(out.get(r, 1), expect, "row {r}");
        }
    }

    #[test]
    fn singular_regression_falls_back_to_mean() {
        // duplicated predictors with no ridge penalty
        let rows = (0..10)
            .map(|i| vec![Some(i as f64), Some(i as f64), if i % 3 == 0 { None } else { Some(1.0 + i as f64) }])
            .collect();
        let m = matrix(
            &[("a", ColumnKind::Continuous), ("b", ColumnKind::Continuous), ("c", ColumnKind::Continuous)],
            rows,
        );
        let cfg = ImputeConfig { ridge_lambda: 0.0, cycles: 2, ..Default::default() };
        let out = mice(&m, &cfg).unwrap();
        assert_eq!(out.mean_fallbacks.len(), 2);
        let mean = [2.0, 3.0, 5.0, 6.0, 8.0, 9.0].iter().sum::<f64>() / 6.0;
        assert_eq!(out.get(0, 2), mean);
    }

    #[test]
    fn precondition_errors() {
        let m = matrix(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Continuous)], vec![
            vec![Some(1.0), None],
            vec![None, None],
            vec![Some(2.0), Some(1.0)],
        ]);
        assert!(matches!(mice(&m, &ImputeConfig::default()), Err(ImputeError::EmptyRow(1))));
        let m = matrix(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Continuous)], vec![
            vec![Some(1.0), None],
            vec![Some(2.0), Some(1.0)],
        ]);
        assert!(matches!(mice(&m, &ImputeConfig::default()), Err(ImputeError::TooFewObserved(_))));
        let bad = ImputeConfig { drop_threshold: 1.0, ..Default::default() };
        assert!(matches!(mice(&m, &bad), Err(ImputeError::Config(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let rows: Vec<Vec<Option<f32>>> = (0..30)
            .map(|i| vec![Some(i as f32), if i % 4 == 1 { None } else { Some(3.0 * i as f32 - 2.0) }])
            .collect();
        let m = FeatureMatrix::new(
            vec![Column::new("x", ColumnKind::Continuous), Column::new("y", ColumnKind::Continuous)],
            (0..30).map(|i| i.to_string()).collect(),
            rows.into_iter().flatten().collect(),
            vec![0; 30],
        )
        .unwrap();
        let out = mice(&m, &ImputeConfig::default()).unwrap();
        assert!((out.get(1, 1) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn provenance_csv_round_trip() {
        let m = matrix(&[("a", ColumnKind::Continuous), ("b", ColumnKind::Continuous)], vec![
            vec![Some(1.0), None],
            vec![Some(2.0), Some(4.0)],
            vec![Some(3.0), Some(6.0)],
        ]);
        let out = mice(&m, &ImputeConfig::default()).unwrap();
        let (mut v, mut p) = (Vec::new(), Vec::new());
        out.write_csv(&mut v).unwrap();
        out.write_provenance_csv(&mut p).unwrap();
        assert_eq!(String::from_utf8(p.clone()).unwrap(), "stay_id,a,b\ns0,0,1\ns1,0,0\ns2,0,0\n");
        let back = ImputedMatrix::<f64>::read_csv(&v[..], &p[..], &out.columns, vec![]).unwrap();
        assert_eq!(back.values, out.values);
        assert_eq!(back.imputed, out.imputed);
    }
}
