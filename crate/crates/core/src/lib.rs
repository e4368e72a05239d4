//! Acute kidney injury prediction from first-day ICU cohort features
//! augmented with drug fingerprints.
//!
//! The pipeline resolves prescriptions to SMILES, parses them into
//! molecular graphs, hashes them into extended-connectivity fingerprints,
//! joins those with first-day vitals and labs, imputes missing values with
//! chained equations and trains tree ensembles.

pub mod cohort;
pub mod experiment;
pub mod fingerprint;
pub mod impute;
mod linalg;
pub mod metrics;
pub mod model;
pub mod molgraph;
pub mod resolver;
pub mod scalar;
pub mod synth;

pub use scalar::Scalar;

pub type FeatureMatrixF64 = cohort::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = cohort::FeatureMatrix<f32>;
pub type ImputedMatrixF64 = impute::ImputedMatrix<f64>;
pub type ImputedMatrixF32 = impute::ImputedMatrix<f32>;
pub type DatasetF64 = model::Dataset<f64>;
pub type DatasetF32 = model::Dataset<f32>;
pub type EnsembleModelF64 = model::EnsembleModel<f64>;
pub type EnsembleModelF32 = model::EnsembleModel<f32>;
