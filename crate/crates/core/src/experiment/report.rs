use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    funnel_with_resolution, hex, io_err, shared_hash, write_json, Arm, ExperimentConfig, ExperimentError,
    ResolutionSummary, Split, REPORT_JSON_FILE, REPORT_TEXT_FILE,
};
use crate::cohort::{CohortManifest, FunnelStage};
use crate::impute::{DroppedColumn, ImputedMatrix};
use crate::metrics::EvalReport;
use crate::model::{Dataset, EnsembleModel};
use crate::Scalar;

pub const FINGERPRINT_NOTE: &str =
    "fingerprint columns are appended after imputation; they are never missing and never enter the imputation models";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub n_features: usize,
    pub eval: EvalReport,
    pub model_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hashes {
    pub baseline_shared: String,
    pub multimodal_shared: String,
}

impl Hashes {
    pub fn symmetric(&self) -> bool {
        self.baseline_shared == self.multimodal_shared
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub notes: Vec<String>,
    pub learner: String,
    pub seed: u64,
    pub funnel: Vec<FunnelStage>,
    pub resolution: ResolutionSummary,
    pub dropped_columns: Vec<DroppedColumn>,
    pub mean_fallbacks: Vec<(String, usize)>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_positive: usize,
    pub baseline: ArmReport,
    pub multimodal: ArmReport,
    pub delta: Delta,
    pub hashes: Hashes,
}

pub fn arm_report<T: Scalar>(
    cfg: &ExperimentConfig,
    arm: Arm,
    data: &Dataset<T>,
    model: &EnsembleModel<T>,
    split: &Split,
) -> Result<ArmReport, ExperimentError> {
    Ok(ArmReport {
        arm,
        n_features: data.n_cols(),
        eval: super::evaluate_arm(cfg, model, data, split)?,
        model_sha256: hex(&Sha256::digest(model.to_bytes())),
    })
}

impl ExperimentReport {
    pub fn assemble<T: Scalar>(
        cfg: &ExperimentConfig,
        manifest: &CohortManifest,
        resolution: &ResolutionSummary,
        imputed: &ImputedMatrix<T>,
        split: &Split,
        arms: &[(Arm, Dataset<T>, EnsembleModel<T>)],
    ) -> Result<Self, ExperimentError> {
        let params = cfg.learner.params();
        let d = imputed.n_cols();
        let mut reports = Vec::new();
        let mut hashes = Vec::new();
        for (arm, data, model) in arms {
            reports.push(arm_report(cfg, *arm, data, model, split)?);
            hashes.push(shared_hash(data, d, split, &params));
        }
        let [baseline, multimodal]: [ArmReport; 2] = reports
            .try_into()
            .map_err(|_| ExperimentError::Data("expected two arms".into()))?;
        let delta = Delta {
            auroc: multimodal.eval.auroc - baseline.eval.auroc,
            auprc: multimodal.eval.auprc - baseline.eval.auprc,
            f1: multimodal.eval.f1 - baseline.eval.f1,
        };
        let mut notes = vec![FINGERPRINT_NOTE.to_string()];
        notes.extend(manifest.notes.iter().cloned());
        Ok(ExperimentReport {
            notes,
            learner: cfg.learner.model_kind().as_str().to_string(),
            seed: cfg.split.seed,
            funnel: funnel_with_resolution(manifest, resolution),
            resolution: resolution.clone(),
            dropped_columns: imputed.dropped_columns.clone(),
            mean_fallbacks: imputed.mean_fallbacks.clone(),
            n_train: split.train.len(),
            n_test: split.test.len(),
            n_test_positive: split.test.iter().filter(|&&i| imputed.labels[i] == 1).count(),
            baseline,
            multimodal,
            delta,
            hashes: Hashes {
                baseline_shared: hashes[0].clone(),
                multimodal_shared: hashes[1].clone(),
            },
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        let _ = writeln!(s, "\nlearner: {}  seed: {}\n", self.learner, self.seed);
        let _ = writeln!(s, "{:<32}{:>8}{:>10}", "cohort stage", "stays", "patients");
        for f in &self.funnel {
            let _ = writeln!(s, "{:<32}{:>8}{:>10}", f.stage, f.stays, f.patients);
        }
        let r = &self.resolution;
        let _ = writeln!(
            s,
            "\ndrug records: {}  upstream calls: {}  upstream errors: {}  stays with no resolved drug: {}",
            r.records, r.upstream_calls, r.upstream_errors, r.stays_all_unresolved
        );
        for (status, n) in &r.by_status {
            let _ = writeln!(s, "  {status:<22}{n:>8}");
        }
        let dropped: Vec<String> = self
            .dropped_columns
            .iter()
            .map(|d| format!("{} ({:.1}%)", d.name, 100.0 * d.missing_fraction))
            .collect();
        let _ = writeln!(s, "dropped columns: {}", if dropped.is_empty() { "none".into() } else { dropped.join(", ") });
        let _ = writeln!(
            s,
            "train rows: {}  test rows: {} ({} positive)\n",
            self.n_train, self.n_test, self.n_test_positive
        );
        let fp = &r.fingerprint;
        let _ = writeln!(s, "{:<34}{:>9}{:>8}{:>8}{:>8}", "model", "features", "AUROC", "AUPRC", "F1");
        let rows = [
            ("Baseline cohort features".to_string(), &self.baseline),
            (format!("Multimodal + ECFP r{} w{}", fp.radius, fp.width), &self.multimodal),
        ];
        for (name, a) in rows {
            let _ = writeln!(
                s,
                "{:<34}{:>9}{:>8.3}{:>8.3}{:>8.3}",
                name, a.n_features, a.eval.auroc, a.eval.auprc, a.eval.f1
            );
        }
        let _ = writeln!(
            s,
            "{:<34}{:>9}{:>+8.3}{:>+8.3}{:>+8.3}",
            "difference", "", self.delta.auroc, self.delta.auprc, self.delta.f1
        );
        let _ = writeln!(
            s,
            "\nshared intermediates: {} ({})",
            &self.hashes.baseline_shared[..16],
            if self.hashes.symmetric() { "identical across arms" } else { "DIFFER across arms" }
        );
        s
    }

    pub fn write(&self, out: &Path) -> Result<(), ExperimentError> {
        let path = out.join(REPORT_TEXT_FILE);
        std::fs::write(&path, self.to_text()).map_err(io_err(&path))?;
        write_json(&out.join(REPORT_JSON_FILE), self)
    }

    pub fn read(out: &Path) -> Result<Self, ExperimentError> {
        super::read_json(&out.join(REPORT_JSON_FILE))
    }
}
