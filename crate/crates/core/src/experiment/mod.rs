//! Baseline versus drug-fingerprint comparison.
//!
//! Each stage reads and writes the files listed below, so runs can be
//! resumed stage by stage and the result matches a single
//! [`run_experiment`] call byte for byte.
//!
//! | stage      | writes                                                   |
//! |------------|----------------------------------------------------------|
//! | input      | `data/` (synthetic mode only)                            |
//! | featurize  | `features.csv`, `cohort.json`                            |
//! | resolve    | `drugs.csv`, `resolution.json`                           |
//! | impute     | `imputed.csv`, `imputed_provenance.csv`, `imputed.json`  |
//! | train      | `split.csv`, `models/{baseline,multimodal}.bin`          |
//! | evaluate   | `report.txt`, `report.json`                              |

pub mod config;
mod drugs;
mod report;
mod split;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cohort::{read_cohort_dir, Cohort, CohortError, CohortManifest, FeatureMatrix, FeatureSchema};
use crate::impute::{drop_and_impute, DroppedColumn, ImputeError, ImputedMatrix};
use crate::metrics::{EvalReport, MetricError};
use crate::model::{train_gbdt, train_random_forest, Dataset, EnsembleModel, ModelError, ModelParams};
use crate::resolver::ResolveError;
use crate::synth::{generate_synthetic, SpecError, FIXTURES_FILE};
use crate::Scalar;

pub use config::{ConfigError, ExperimentConfig, FingerprintConfig, LearnerConfig, LearnerKind, SplitConfig};
pub use drugs::{read_drugs, resolve_drugs, DrugFeatures, ResolutionSummary, RESOLUTION_STAGE};
pub use report::{arm_report, ArmReport, Delta, ExperimentReport, Hashes, FINGERPRINT_NOTE};
pub use split::{stratified_split, Split};

pub const DATA_DIR: &str = "data";
pub const FEATURES_FILE: &str = "features.csv";
pub const COHORT_FILE: &str = "cohort.json";
pub const DRUGS_FILE: &str = "drugs.csv";
pub const RESOLUTION_FILE: &str = "resolution.json";
pub const IMPUTED_FILE: &str = "imputed.csv";
pub const PROVENANCE_FILE: &str = "imputed_provenance.csv";
pub const IMPUTED_MANIFEST_FILE: &str = "imputed.json";
pub const SPLIT_FILE: &str = "split.csv";
pub const MODELS_DIR: &str = "models";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Synthetic(#[from] SpecError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Data(String),
}

impl ExperimentError {
    /// Configuration problems as opposed to problems with the data.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
            || matches!(self, ExperimentError::Resolve(ResolveError::Config(_)))
            || matches!(self, ExperimentError::Synthetic(SpecError::Invalid(_)))
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn format_err(path: &Path) -> impl FnOnce(String) -> ExperimentError + '_ {
    move |message| ExperimentError::Format { path: path.to_path_buf(), message }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, ExperimentError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| format_err(path)(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub(crate) fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path)(e.to_string()))
}

/// Where ingestion reads from once the input stage has run.
#[derive(Debug, Clone)]
pub struct Input {
    pub cohort_dir: PathBuf,
    pub resolver: crate::resolver::ResolverConfig,
}

/// Generates the synthetic bundle under `out/data` when configured. In
/// that case the bundle's fixture file answers resolver lookups unless
/// the config names one.
pub fn prepare_input(cfg: &ExperimentConfig, out: &Path) -> Result<Input, ExperimentError> {
    cfg.validate()?;
    let mut resolver = cfg.resolver.clone();
    let cohort_dir = match (&cfg.input.cohort_dir, &cfg.input.synthetic) {
        (Some(dir), _) => dir.clone(),
        (None, Some(spec)) => {
            let dir = out.join(DATA_DIR);
            generate_synthetic(spec, &dir)?;
            resolver.fixtures.get_or_insert_with(|| dir.join(FIXTURES_FILE));
            dir
        }
        (None, None) => unreachable!("validated"),
    };
    Ok(Input { cohort_dir, resolver })
}

pub fn load_schema(cfg: &ExperimentConfig) -> Result<FeatureSchema, ExperimentError> {
    match &cfg.input.schema {
        None => Ok(FeatureSchema::default_schema()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            FeatureSchema::from_toml(&text).map_err(|e| ConfigError::Invalid(e.to_string()).into())
        }
    }
}

/// Reads the CSV export and applies exclusions and the prescription filter.
pub fn build_cohort(cfg: &ExperimentConfig, input: &Input) -> Result<Cohort, ExperimentError> {
    let stays = read_cohort_dir(&input.cohort_dir).map_err(CohortError::from)?;
    Ok(Cohort::build(stays, &cfg.kdigo, &load_schema(cfg)?)?)
}

/// Writes `features.csv` and `cohort.json`.
pub fn featurize<T: Scalar>(cfg: &ExperimentConfig, cohort: &Cohort, out: &Path) -> Result<FeatureMatrix<T>, ExperimentError> {
    let fm = cohort.feature_matrix::<T>(&load_schema(cfg)?).map_err(CohortError::from)?;
    let path = out.join(FEATURES_FILE);
    fm.write_csv(create(&path)?).map_err(|e| format_err(&path)(e.to_string()))?;
    let path = out.join(COHORT_FILE);
    cohort.manifest.write(&path).map_err(io_err(&path))?;
    Ok(fm)
}

pub fn read_features<T: Scalar>(out: &Path) -> Result<(FeatureMatrix<T>, CohortManifest), ExperimentError> {
    let path = out.join(COHORT_FILE);
    let manifest = CohortManifest::read(&path).map_err(io_err(&path))?;
    let path = out.join(FEATURES_FILE);
    let fm = FeatureMatrix::read_csv(open(&path)?, &manifest.columns).map_err(|e| format_err(&path)(e.to_string()))?;
    Ok((fm, manifest))
}

/// Sidecar to `imputed.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedManifest {
    pub columns: Vec<crate::cohort::Column>,
    pub dropped_columns: Vec<DroppedColumn>,
    pub mean_fallbacks: Vec<(String, usize)>,
}

/// Writes `imputed.csv`, `imputed_provenance.csv` and `imputed.json`.
pub fn impute<T: Scalar>(cfg: &ExperimentConfig, fm: &FeatureMatrix<T>, out: &Path) -> Result<ImputedMatrix<T>, ExperimentError> {
    let imputed = drop_and_impute(fm, &cfg.impute)?;
    let path = out.join(IMPUTED_FILE);
    imputed.write_csv(create(&path)?).map_err(|e| format_err(&path)(e.to_string()))?;
    let path = out.join(PROVENANCE_FILE);
    imputed.write_provenance_csv(create(&path)?).map_err(|e| format_err(&path)(e.to_string()))?;
    let manifest = ImputedManifest {
        columns: imputed.columns.clone(),
        dropped_columns: imputed.dropped_columns.clone(),
        mean_fallbacks: imputed.mean_fallbacks.clone(),
    };
    write_json(&out.join(IMPUTED_MANIFEST_FILE), &manifest)?;
    Ok(imputed)
}

pub fn read_imputed<T: Scalar>(out: &Path) -> Result<ImputedMatrix<T>, ExperimentError> {
    let manifest: ImputedManifest = read_json(&out.join(IMPUTED_MANIFEST_FILE))?;
    let values = out.join(IMPUTED_FILE);
    let mut m = ImputedMatrix::read_csv(open(&values)?, open(&out.join(PROVENANCE_FILE))?, &manifest.columns, manifest.dropped_columns)
        .map_err(|e| format_err(&values)(e.to_string()))?;
    m.mean_fallbacks = manifest.mean_fallbacks;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    Multimodal,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Multimodal => "multimodal",
        }
    }

    pub fn model_path(self, out: &Path) -> PathBuf {
        out.join(MODELS_DIR).join(format!("{}.bin", self.as_str()))
    }
}

/// Cohort features for the baseline arm; fingerprint columns appended
/// after imputation for the multimodal arm.
pub fn arm_dataset<T: Scalar>(
    arm: Arm,
    imputed: &ImputedMatrix<T>,
    drugs: &DrugFeatures,
) -> Result<Dataset<T>, ExperimentError> {
    let base = Dataset::from_imputed(imputed);
    match arm {
        Arm::Baseline => Ok(base),
        Arm::Multimodal => {
            let rows = drugs.rows_for(&imputed.row_ids).map_err(ExperimentError::Data)?;
            Ok(base.with_fingerprint_columns(&rows, drugs.width)?)
        }
    }
}

pub fn train_model<T: Scalar>(data: &Dataset<T>, params: &ModelParams) -> Result<EnsembleModel<T>, ExperimentError> {
    Ok(match params {
        ModelParams::Gbdt(p) => train_gbdt(data, p)?,
        ModelParams::Forest(p) => train_random_forest(data, p)?,
    })
}

/// Fits one arm on the training rows and saves it.
pub fn train_arm<T: Scalar>(
    cfg: &ExperimentConfig,
    arm: Arm,
    data: &Dataset<T>,
    split: &Split,
    out: &Path,
) -> Result<EnsembleModel<T>, ExperimentError> {
    let model = train_model(&data.subset(&split.train), &cfg.learner.params())?;
    let path = arm.model_path(out);
    let bytes = model.to_bytes();
    create(&path)?;
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(model)
}

pub fn load_model<T: Scalar>(arm: Arm, out: &Path) -> Result<EnsembleModel<T>, ExperimentError> {
    let path = arm.model_path(out);
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    Ok(EnsembleModel::from_bytes(&bytes)?)
}

/// Scores the held-out rows.
pub fn evaluate_arm<T: Scalar>(
    cfg: &ExperimentConfig,
    model: &EnsembleModel<T>,
    data: &Dataset<T>,
    split: &Split,
) -> Result<EvalReport, ExperimentError> {
    let test = data.subset(&split.test);
    let scores = model.predict_proba(&test)?;
    Ok(EvalReport::compute(&scores, test.labels(), T::of(cfg.f1_threshold))?)
}

/// SHA-256 over the split, the imputed cohort columns of an arm's
/// dataset and the learner settings. Equal for both arms when only the
/// fingerprint columns differ.
pub fn shared_hash<T: Scalar>(data: &Dataset<T>, n_cohort_columns: usize, split: &Split, params: &ModelParams) -> String {
    let mut h = Sha256::new();
    for idx in [&split.train, &split.test] {
        h.update((idx.len() as u64).to_le_bytes());
        for &i in idx {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.update(data.labels());
    for name in &data.column_names()[..n_cohort_columns] {
        h.update(name.as_bytes());
        h.update([0]);
    }
    for r in 0..data.n_rows() {
        for v in &data.row(r)[..n_cohort_columns] {
            h.update(v.f64().to_le_bytes());
        }
    }
    h.update(format!("{params:?}").as_bytes());
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn funnel_with_resolution(manifest: &CohortManifest, summary: &ResolutionSummary) -> Vec<crate::cohort::FunnelStage> {
    let mut funnel = manifest.funnel.clone();
    funnel.push(summary.funnel_stage.clone());
    funnel
}

/// Runs every stage in order and writes the report.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let input = prepare_input(cfg, out)?;
    let cohort = build_cohort(cfg, &input)?;
    let fm = featurize::<T>(cfg, &cohort, out)?;
    let drugs = resolve_drugs(&cohort, &input.resolver, &cfg.fingerprint, out)?;
    let imputed = impute(cfg, &fm, out)?;
    let split = stratified_split(&imputed.row_ids, &imputed.labels, &cfg.split)?;
    split.write_csv(&imputed.row_ids, &out.join(SPLIT_FILE))?;
    let mut arms = Vec::new();
    for arm in [Arm::Baseline, Arm::Multimodal] {
        let data = arm_dataset(arm, &imputed, &drugs.0)?;
        let model = train_arm(cfg, arm, &data, &split, out)?;
        arms.push((arm, data, model));
    }
    let report = ExperimentReport::assemble(cfg, &cohort.manifest, &drugs.1, &imputed, &split, &arms)?;
    report.write(out)?;
    Ok(report)
}

#[cfg(test)]
mod tests;
