//! EHR-shaped ingestion, KDIGO labelling, exclusions and first-day
//! features.

pub mod features;
pub mod ingest;
pub mod kdigo;
pub mod matrix;
pub mod schema;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{build_feature_matrix, extract_first_day_features, FeatureError};
pub use ingest::{read_cohort_dir, write_cohort_dir, Diagnosis, Event, IngestError, Prescription, StayRecord};
pub use kdigo::{
    apply_exclusions, filter_first_day_prescription, label_aki, AkiCriterion, AkiLabel, ExclusionCounts,
    ExclusionOutcome, FunnelStage, KdigoConfig, KdigoError, LabeledStay,
};
pub use matrix::{Column, ColumnKind, FeatureMatrix, MatrixError, ID_COLUMN, LABEL_COLUMN};
pub use schema::{FeatureSchema, SchemaError};

/// Sidecar describing a feature-matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub id_column: String,
    pub label_column: String,
    pub columns: Vec<Column>,
    pub funnel: Vec<FunnelStage>,
    pub excluded: ExclusionCounts,
    pub kdigo: KdigoConfig,
    pub n_positive: usize,
    pub notes: Vec<String>,
}

pub const LATE_ONSET_NOTE: &str = "stays whose AKI onset falls after the label window are excluded, \
so every retained positive has its onset inside the window";

impl CohortManifest {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CohortError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Kdigo(#[from] KdigoError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// The cohort after exclusions and the prescription filter.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub stays: Vec<LabeledStay>,
    pub manifest: CohortManifest,
}

impl Cohort {
    /// Exclusions, then the first-day prescription filter.
    pub fn build(stays: Vec<StayRecord>, kdigo: &KdigoConfig, schema: &FeatureSchema) -> Result<Self, CohortError> {
        let outcome = apply_exclusions(stays, kdigo)?;
        let (kept, stage) = filter_first_day_prescription(outcome.included);
        let mut funnel = outcome.funnel;
        funnel.push(stage);
        let columns = schema.columns().map_err(FeatureError::from)?;
        let manifest = CohortManifest {
            id_column: ID_COLUMN.into(),
            label_column: LABEL_COLUMN.into(),
            columns,
            funnel,
            excluded: outcome.excluded,
            kdigo: kdigo.clone(),
            n_positive: kept.iter().filter(|s| s.aki.label == 1).count(),
            notes: vec![LATE_ONSET_NOTE.into()],
        };
        Ok(Cohort { stays: kept, manifest })
    }

    pub fn feature_matrix<T: crate::Scalar>(&self, schema: &FeatureSchema) -> Result<FeatureMatrix<T>, FeatureError> {
        build_feature_matrix(&self.stays, schema)
    }
}
