//! TOML experiment configuration.
//!
//! ```toml
//! [input]
//! cohort_dir = "export/"          # or a [input.synthetic] table
//!
//! [fingerprint]
//! radius = 2
//! width = 1024
//! aggregation = "or"              # or { sum-clipped = { cap = 3 } }
//!
//! [learner]
//! kind = "gbdt"                   # or "random_forest"
//! [learner.gbdt]
//! n_trees = 200
//!
//! [split]
//! train_fraction = 0.8
//! seed = 0
//! ```
//!
//! Every table is optional. `NEPHROFP_SEED`, `NEPHROFP_COHORT_DIR` and
//! `NEPHROFP_CACHE` override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::KdigoConfig;
use crate::fingerprint::{Aggregation, DEFAULT_RADIUS, DEFAULT_WIDTH};
use crate::impute::ImputeConfig;
use crate::model::forest::ForestParams;
use crate::model::gbdt::GbdtParams;
use crate::model::{ModelKind, ModelParams};
use crate::resolver::ResolverConfig;
use crate::synth::SynthSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Directory of ingestion CSVs.
    pub cohort_dir: Option<PathBuf>,
    /// Generate a planted-signal bundle instead.
    pub synthetic: Option<SynthSpec>,
    /// Feature schema TOML; the built-in schema when absent.
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerprintConfig {
    pub radius: u32,
    pub width: usize,
    pub aggregation: Aggregation,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            radius: DEFAULT_RADIUS,
            width: DEFAULT_WIDTH,
            aggregation: Aggregation::Or,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    Gbdt,
    RandomForest,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub gbdt: GbdtParams,
    pub random_forest: ForestParams,
}

impl LearnerConfig {
    pub fn params(&self) -> ModelParams {
        match self.kind {
            LearnerKind::Gbdt => ModelParams::Gbdt(self.gbdt.clone()),
            LearnerKind::RandomForest => ModelParams::Forest(self.random_forest.clone()),
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.kind {
            LearnerKind::Gbdt => ModelKind::Gbdt,
            LearnerKind::RandomForest => ModelKind::RandomForest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            stratified: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputConfig,
    pub kdigo: KdigoConfig,
    pub resolver: ResolverConfig,
    pub fingerprint: FingerprintConfig,
    pub impute: ImputeConfig,
    pub learner: LearnerConfig,
    pub split: SplitConfig,
    pub f1_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: InputConfig::default(),
            kdigo: KdigoConfig::default(),
            resolver: ResolverConfig::default(),
            fingerprint: FingerprintConfig::default(),
            impute: ImputeConfig::default(),
            learner: LearnerConfig::default(),
            split: SplitConfig::default(),
            f1_threshold: 0.5,
        }
    }
}

impl ExperimentConfig {
    /// A planted-signal run with default settings.
    pub fn synthetic(spec: SynthSpec) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.input.synthetic = Some(spec);
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a TOML file, applies environment overrides, resolves relative
    /// paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(seed) = var("NEPHROFP_SEED") {
            let seed = seed
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("NEPHROFP_SEED={seed:?} is not an integer")))?;
            self.set_seed(seed);
        }
        if let Some(dir) = var("NEPHROFP_COHORT_DIR") {
            self.input.cohort_dir = Some(dir.into());
        }
        if let Some(cache) = var("NEPHROFP_CACHE") {
            self.resolver.cache_path = Some(cache.into());
        }
        Ok(())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.cohort_dir);
        fix(&mut self.input.schema);
        fix(&mut self.resolver.fixtures);
        fix(&mut self.resolver.cache_path);
    }

    /// One seed for data generation, the split and both learners.
    pub fn set_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.learner.gbdt.seed = seed;
        self.learner.random_forest.seed = seed;
        self.impute.seed = seed;
        if let Some(spec) = self.input.synthetic.as_mut() {
            spec.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        match (&self.input.cohort_dir, &self.input.synthetic) {
            (Some(_), Some(_)) => return invalid("set either input.cohort_dir or input.synthetic, not both".into()),
            (None, None) => return invalid("one of input.cohort_dir or input.synthetic is required".into()),
            (Some(dir), None) if !dir.is_dir() => return invalid(format!("cohort_dir {} does not exist", dir.display())),
            (None, Some(spec)) => spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?,
            _ => {}
        }
        for p in [&self.input.schema, &self.resolver.fixtures].into_iter().flatten() {
            if !p.is_file() {
                return invalid(format!("{} does not exist", p.display()));
            }
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return invalid("split.train_fraction must be in (0, 1)".into());
        }
        if !(self.f1_threshold > 0.0 && self.f1_threshold < 1.0) {
            return invalid("f1_threshold must be in (0, 1)".into());
        }
        if self.fingerprint.width == 0 {
            return invalid("fingerprint.width must be positive".into());
        }
        let err = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.kdigo.validate().map_err(|e| err(&e))?;
        self.impute.validate().map_err(|e| err(&e))?;
        self.resolver.validate().map_err(|e| err(&e))?;
        self.learner.gbdt.validate().map_err(|e| err(&e))?;
        self.learner.random_forest.validate().map_err(|e| err(&e))?;
        Ok(())
    }
}
