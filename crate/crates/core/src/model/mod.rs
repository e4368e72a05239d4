//! Tree ensembles: histogram gradient boosting and a random forest.

pub mod binning;
mod dataset;
pub mod forest;
pub mod gbdt;
pub mod io;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use dataset::Dataset;
pub use forest::{train_decision_tree, train_random_forest, ForestParams, TreeParams};
pub use gbdt::{train_gbdt, GbdtParams};
pub use tree::{Node, Tree};

const PROBA_CLIP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("labels must be 0 or 1")]
    BadLabel,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("unsupported model file: {found}")]
    FormatVersionMismatch { found: String },
    #[error("model was saved with {found}-byte scalars, expected {expected}")]
    ScalarMismatch { expected: u8, found: u8 },
    #[error("model file is truncated")]
    Truncated,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    RandomForest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::RandomForest => "random_forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Gbdt(GbdtParams),
    Forest(ForestParams),
}

/// A trained, immutable ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<T> {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub n_features: usize,
    /// Log-odds prior for boosting, unused by the forest.
    pub base_score: T,
    pub trees: Vec<Tree<T>>,
    /// Training log-loss before the first tree and after each tree
    /// (boosting only).
    pub loss_trace: Vec<f64>,
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn learning_rate(&self) -> T {
        match &self.params {
            ModelParams::Gbdt(p) => T::of(p.learning_rate),
            ModelParams::Forest(_) => T::one(),
        }
    }

    pub fn predict_row(&self, row: &[T]) -> Result<T, ModelError> {
        if row.len() != self.n_features {
            return Err(ModelError::ShapeMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(match self.kind {
            ModelKind::Gbdt => {
                let lr = self.learning_rate();
                let raw = self.trees.iter().fold(self.base_score, |acc, t| acc + lr * t.predict(row));
                sigmoid(raw)
            }
            ModelKind::RandomForest => {
                let mean = self.trees.iter().map(|t| t.predict(row)).sum::<T>() / T::of(self.trees.len().max(1) as f64);
                mean.max(T::of(PROBA_CLIP)).min(T::of(1.0 - PROBA_CLIP))
            }
        })
    }

    pub fn predict_proba(&self, data: &Dataset<T>) -> Result<Vec<T>, ModelError> {
        if data.n_cols() != self.n_features {
            return Err(ModelError::ShapeMismatch {
                expected: self.n_features,
                found: data.n_cols(),
            });
        }
        (0..data.n_rows()).map(|r| self.predict_row(data.row(r))).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::serialize(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        io::deserialize(bytes)
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
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
