//! Planted-signal synthetic cohorts in the ingestion CSV layout.
//!
//! Each stay draws six latent standard-normal factors. Every numeric signal
//! has a level `mean + sd * (L·z + sqrt(1 - |L|²) e)` with fixed loadings
//! `L`, and its first-day measurements scatter around that level. The AKI
//! outcome is Bernoulli with logit
//!
//! ```text
//! b0 + strength * Σ beta_s * (level_s - mean_s) / sd_s + log(effect_odds) * motif
//! ```
//!
//! where `motif` is 1 when any first-day drug contains the designated
//! substructure and `b0` is solved so the expected prevalence matches the
//! target. Creatinine trajectories are then drawn so KDIGO reproduces the
//! label: positives jump by about 0.5 mg/dL at 24-60 h, negatives stay
//! flat. A small share of stays is built to fail each exclusion rule.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::ingest::{is_kidney_code, write_cohort_dir, Diagnosis, Event, IngestError, Prescription, StayRecord};
use crate::cohort::kdigo::CREATININE;
use crate::metrics::auroc;
use crate::molgraph::parse_smiles;
use crate::resolver::{ndc_key, DrugRecord};

pub const FIXTURES_FILE: &str = "resolver_fixtures.tsv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Aryl-alkanoic acid, the NSAID scaffold.
pub const DEFAULT_MOTIF: &str = "cCC(=O)O";

const N_LATENT: usize = 6;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("catalog drug {name:?} has an unparseable SMILES: {message}")]
    Smiles { name: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogDrug {
    pub generic: String,
    pub brand: String,
    pub ndc: String,
    /// `None` for products no database knows about.
    pub smiles: Option<String>,
    pub dose: String,
}

fn drug(generic: &str, brand: &str, ndc: &str, smiles: &str, dose: &str) -> CatalogDrug {
    CatalogDrug {
        generic: generic.into(),
        brand: brand.into(),
        ndc: ndc.into(),
        smiles: (!smiles.is_empty()).then(|| smiles.into()),
        dose: dose.into(),
    }
}

pub fn default_catalog() -> Vec<CatalogDrug> {
    vec![
        drug("Ibuprofen", "Motrin", "50580049660", "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "400mg Tab"),
        drug("Naproxen", "Aleve", "41167019101", "COc1ccc2cc(ccc2c1)C(C)C(=O)O", "250mg Tab"),
        drug("Diclofenac", "Voltaren", "00078047905", "OC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl", "50mg Tab"),
        drug("Ketorolac", "Toradol", "00409379301", "OC(=O)C1CCn2c1ccc2C(=O)c1ccccc1", "15mg IV"),
        drug("Ketoprofen", "Orudis", "00008418001", "CC(C(=O)O)c1cccc(c1)C(=O)c1ccccc1", "50mg Cap"),
        drug("Indomethacin", "Indocin", "00006002568", "COc1ccc2n(C(=O)c3ccc(Cl)cc3)c(C)c(CC(=O)O)c2c1", "25mg Cap"),
        drug("Flurbiprofen", "Ansaid", "00009017001", "CC(C(=O)O)c1ccc(-c2ccccc2)c(F)c1", "100mg Tab"),
        drug("Fenoprofen", "Nalfon", "42195030001", "CC(C(=O)O)c1cccc(Oc2ccccc2)c1", "200mg Cap"),
        drug("Tolmetin", "Tolectin", "00045040160", "Cc1ccc(cc1)C(=O)c1ccc(CC(=O)O)n1C", "200mg Tab"),
        drug("Aspirin", "Bayer", "00280200010", "CC(=O)Oc1ccccc1C(=O)O", "81mg Tab"),
        drug("Acetaminophen", "Tylenol", "50580045701", "CC(=O)Nc1ccc(O)cc1", "325mg Tab"),
        drug("Furosemide", "Lasix", "00039006710", "NS(=O)(=O)c1cc(C(=O)O)c(NCc2ccco2)cc1Cl", "40mg IV"),
        drug("Metformin", "Glucophage", "00087606010", "CN(C)C(=N)N=C(N)N", "500mg Tab"),
        drug("Lisinopril", "Zestril", "00310013010", "NCCCCC(NC(CCc1ccccc1)C(=O)O)C(=O)N1CCCC1C(=O)O", "10mg Tab"),
        drug("Amoxicillin", "Amoxil", "43598022505", "CC1(C)SC2C(NC(=O)C(N)c3ccc(O)cc3)C(=O)N2C1C(=O)O", "500mg Cap"),
        drug("Ciprofloxacin", "Cipro", "00085177101", "OC(=O)c1cn(C2CC2)c2cc(N3CCNCC3)c(F)cc2c1=O", "400mg IV"),
        drug("Warfarin", "Coumadin", "00056017270", "CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O", "5mg Tab"),
        drug("Morphine", "Duramorph", "00641612501", "CN1CCC23c4c5ccc(O)c4OC2C(O)C=CC3C1C5", "2mg IV"),
        drug("Acyclovir", "Zovirax", "00173099155", "Nc1nc2n(COCCO)cnc2c(=O)[nH]1", "400mg Tab"),
        drug("Metoprolol", "Lopressor", "00078045805", "COCCc1ccc(OCC(O)CNC(C)C)cc1", "25mg Tab"),
        drug("Atorvastatin", "Lipitor", "00071015523", "CC(C)c1n(CCC(O)CC(O)CC(=O)O)c(-c2ccc(F)cc2)c(-c2ccccc2)c1C(=O)Nc1ccccc1", "40mg Tab"),
        drug("Omeprazole", "Prilosec", "00186074231", "COc1ccc2[nH]c(nc2c1)S(=O)Cc1ncc(C)c(OC)c1C", "20mg Cap"),
        drug("Amlodipine", "Norvasc", "00069152066", "CCOC(=O)C1=C(COCCN)NC(C)=C(C1c1ccccc1Cl)C(=O)OC", "5mg Tab"),
        drug("Trimethoprim", "Primsol", "00093221501", "COc1cc(Cc2cnc(N)nc2N)cc(OC)c1OC", "100mg Tab"),
        drug("Sulfamethoxazole", "Gantanol", "00004001501", "Cc1cc(NS(=O)(=O)c2ccc(N)cc2)no1", "800mg Tab"),
        drug("Lorazepam", "Ativan", "00187006301", "OC1N=C(c2ccccc2Cl)c2cc(Cl)ccc2NC1=O", "1mg IV"),
        drug("Propofol", "Diprivan", "63323026929", "CC(C)c1cccc(C(C)C)c1O", "10mg/ml IV"),
        drug("Ondansetron", "Zofran", "00173044200", "Cc1nccn1CC1CCc2c(C1=O)c1ccccc1n2C", "4mg IV"),
        drug("Midazolam", "Versed", "00409230531", "Cc1ncc2n1-c1ccc(Cl)cc1C(c1ccccc1F)=NC2", "2mg IV"),
        drug("Propranolol", "Inderal", "00046042181", "CC(C)NCC(O)COc1cccc2ccccc12", "10mg Tab"),
        drug("Allopurinol", "Zyloprim", "65162009210", "O=c1[nH]cnc2[nH]ncc12", "100mg Tab"),
        drug("Celecoxib", "Celebrex", "00025152531", "Cc1ccc(cc1)-c1cc(nn1-c1ccc(cc1)S(N)(=O)=O)C(F)(F)F", "200mg Cap"),
        drug("Potassium Chloride", "Klor-Con", "00245004101", "[K+].[Cl-]", "20 mEq PO"),
        drug("Investigational Agent NX-17", "NX-17", "99999000117", "", "10mg IV"),
        drug("Compounded Mouthwash", "Magic Mouthwash", "99999000230", "", "15ml PO"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_stays: usize,
    /// Target positive rate among stays that pass every exclusion.
    pub prevalence: f64,
    /// Odds multiplier for stays given a drug containing the motif.
    pub effect_odds: f64,
    pub seed: u64,
    /// Scale on the cohort-feature part of the logit.
    pub signal_strength: f64,
    /// Share of stays built to fail one exclusion rule each.
    pub exclusion_fraction: f64,
    /// Share of stays that reuse an earlier patient.
    pub repeat_patient_fraction: f64,
    pub max_drugs_per_stay: usize,
    pub motif: String,
    /// Probability that a signal has no first-day measurement.
    pub missingness: BTreeMap<String, f64>,
    pub catalog: Vec<CatalogDrug>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let missingness = [
            ("lactate", 0.35),
            ("bilirubin", 0.30),
            ("albumin", 0.45),
            ("ptt", 0.12),
            ("inr", 0.12),
            ("magnesium", 0.08),
            ("phosphate", 0.10),
            ("height_cm", 0.10),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        SynthSpec {
            n_stays: 5000,
            prevalence: 0.25,
            effect_odds: 3.0,
            seed: 42,
            signal_strength: 1.0,
            exclusion_fraction: 0.05,
            repeat_patient_fraction: 0.1,
            max_drugs_per_stay: 4,
            motif: DEFAULT_MOTIF.into(),
            missingness,
            catalog: default_catalog(),
        }
    }
}

/// Population level, spread and clamp range of one numeric signal.
struct SignalModel {
    name: &'static str,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
}

const fn sig(name: &'static str, mean: f64, sd: f64, lo: f64, hi: f64) -> SignalModel {
    SignalModel { name, mean, sd, lo, hi }
}

const VITALS: [SignalModel; 8] = [
    sig("hr", 85.0, 15.0, 30.0, 180.0),
    sig("sbp", 120.0, 18.0, 60.0, 220.0),
    sig("dbp", 62.0, 11.0, 25.0, 130.0),
    sig("mbp", 80.0, 12.0, 35.0, 160.0),
    sig("resp_rate", 19.0, 4.0, 6.0, 45.0),
    sig("temperature", 36.9, 0.6, 34.0, 41.0),
    sig("spo2", 97.0, 2.0, 80.0, 100.0),
    sig("gcs", 13.0, 2.5, 3.0, 15.0),
];

const LABS: [SignalModel; 20] = [
    sig("creatinine", 1.0, 0.3, 0.4, 3.0),
    sig("bun", 20.0, 8.0, 3.0, 90.0),
    sig("glucose", 130.0, 35.0, 50.0, 400.0),
    sig("sodium", 139.0, 4.0, 120.0, 160.0),
    sig("potassium", 4.1, 0.5, 2.5, 6.5),
    sig("chloride", 104.0, 5.0, 85.0, 125.0),
    sig("bicarbonate", 24.0, 3.5, 10.0, 40.0),
    sig("anion_gap", 13.0, 3.0, 4.0, 30.0),
    sig("calcium", 8.6, 0.6, 6.0, 11.5),
    sig("magnesium", 2.0, 0.25, 1.0, 3.5),
    sig("phosphate", 3.5, 0.8, 1.0, 8.0),
    sig("hemoglobin", 11.0, 2.0, 5.0, 18.0),
    sig("hematocrit", 33.0, 6.0, 15.0, 55.0),
    sig("wbc", 11.0, 4.5, 0.5, 40.0),
    sig("platelets", 210.0, 80.0, 10.0, 700.0),
    sig("lactate", 1.8, 0.9, 0.3, 10.0),
    sig("ptt", 32.0, 8.0, 18.0, 100.0),
    sig("inr", 1.3, 0.3, 0.8, 5.0),
    sig("bilirubin", 0.9, 0.6, 0.1, 10.0),
    sig("albumin", 3.2, 0.5, 1.5, 5.0),
];

const AGE: SignalModel = sig("age", 63.0, 16.0, 18.0, 95.0);
const WEIGHT: SignalModel = sig("weight_kg", 80.0, 18.0, 40.0, 180.0);
const HEIGHT: SignalModel = sig("height_cm", 170.0, 10.0, 140.0, 205.0);

/// Label coefficients on standardized signal levels.
pub const LABEL_COEFFICIENTS: [(&str, f64); 6] = [
    ("creatinine", 0.35),
    ("bun", 0.25),
    ("age", 0.20),
    ("sbp", -0.20),
    ("lactate", 0.20),
    ("hr", 0.15),
];

const VITAL_HOURS: [i64; 6] = [1, 5, 9, 13, 17, 21];
const LAB_HOURS: [i64; 2] = [2, 14];
const CREATININE_LATER_HOURS: [i64; 6] = [26, 38, 50, 62, 74, 86];

/// Fixed loadings so the correlation structure does not depend on the
/// seed. Entry `j` of signal `s` is `0.45 * sin(3.1 s + 1.7 j)`, scaled so
/// the loading norm stays below 0.8.
fn loadings(index: usize) -> [f64; N_LATENT] {
    let mut l = [0.0; N_LATENT];
    for (j, v) in l.iter_mut().enumerate() {
        *v = 0.45 * (3.1 * index as f64 + 1.7 * j as f64).sin();
    }
    let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.8 {
        for v in &mut l {
            *v *= 0.8 / norm;
        }
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StayKind {
    Normal,
    PriorKidneyDisease,
    Minor,
    LateOnset,
    NoOutcomeData,
    NoFirstDayPrescription,
}

const EXCLUSION_KINDS: [StayKind; 5] = [
    StayKind::PriorKidneyDisease,
    StayKind::Minor,
    StayKind::LateOnset,
    StayKind::NoOutcomeData,
    StayKind::NoFirstDayPrescription,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub motif_log_odds: f64,
    pub motif_drugs: Vec<String>,
    pub stay_kinds: BTreeMap<String, usize>,
    /// Over normal stays: share positive, share exposed to the motif.
    pub realized_prevalence: f64,
    pub motif_exposure: f64,
    /// AUROC of the true logit with and without the drug term, over
    /// normal stays.
    pub oracle_auroc_full: f64,
    pub oracle_auroc_cohort_only: f64,
    pub labels: BTreeMap<String, u8>,
    /// 1 where a normal stay received at least one motif drug.
    pub motif_exposed: BTreeMap<String, u8>,
}

pub struct SyntheticCohort {
    pub stays: Vec<StayRecord>,
    pub diagnoses: Vec<Diagnosis>,
    pub truth: GroundTruth,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::Invalid(m.to_string()));
        if self.n_stays < 10 {
            return bad("n_stays must be >= 10");
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad("prevalence must be in (0, 1)");
        }
        if !(self.effect_odds > 0.0 && self.effect_odds.is_finite()) {
            return bad("effect_odds must be positive");
        }
        if !(0.0..0.5).contains(&self.exclusion_fraction) || !(0.0..1.0).contains(&self.repeat_patient_fraction) {
            return bad("exclusion_fraction must be in [0, 0.5) and repeat_patient_fraction in [0, 1)");
        }
        if self.max_drugs_per_stay < 1 {
            return bad("max_drugs_per_stay must be >= 1");
        }
        if self.catalog.is_empty() {
            return bad("catalog is empty");
        }
        if let Some((k, _)) = self.missingness.iter().find(|(_, v)| !(0.0..1.0).contains(*v)) {
            return bad(&format!("missingness for {k} must be in [0, 1)"));
        }
        parse_smiles(&self.motif).map_err(|e| SpecError::Invalid(format!("motif: {e}")))?;
        Ok(())
    }

    /// Catalog indices whose molecule contains the motif.
    pub fn motif_drugs(&self) -> Result<Vec<bool>, SpecError> {
        let motif = parse_smiles(&self.motif).map_err(|e| SpecError::Invalid(format!("motif: {e}")))?;
        self.catalog
            .iter()
            .map(|d| match &d.smiles {
                None => Ok(false),
                Some(s) => parse_smiles(s)
                    .map(|m| m.contains_substructure(&motif))
                    .map_err(|e| SpecError::Smiles {
                        name: d.generic.clone(),
                        message: e.to_string(),
                    }),
            })
            .collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-stay draws made before the label is known.
struct Draft {
    stay: StayRecord,
    kind: StayKind,
    levels: BTreeMap<&'static str, f64>,
    cohort_logit: f64,
    motif: bool,
}

fn level(m: &SignalModel, index: usize, z: &[f64; N_LATENT], rng: &mut ChaCha8Rng) -> f64 {
    let l = loadings(index);
    let shared: f64 = l.iter().zip(z).map(|(a, b)| a * b).sum();
    let own = (1.0 - l.iter().map(|v| v * v).sum::<f64>()).sqrt();
    (m.mean + m.sd * (shared + own * normal(rng))).clamp(m.lo, m.hi)
}

/// Solves for the intercept giving the target mean probability.
fn calibrate_intercept(offsets: &[f64], target: f64) -> f64 {
    let mean_p = |b: f64| offsets.iter().map(|o| sigmoid(b + o)).sum::<f64>() / offsets.len() as f64;
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate_cohort(spec: &SynthSpec) -> Result<SyntheticCohort, SpecError> {
    spec.validate()?;
    let motif_flags = spec.motif_drugs()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = NaiveDate::from_ymd_opt(2150, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let n_excluded = (spec.n_stays as f64 * spec.exclusion_fraction).round() as usize;
    let miss = |name: &str| spec.missingness.get(name).copied().unwrap_or(0.0);

    let mut drafts = Vec::with_capacity(spec.n_stays);
    let mut diagnoses = Vec::new();
    let mut patients: Vec<String> = Vec::new();
    for i in 0..spec.n_stays {
        let kind = if i < n_excluded { EXCLUSION_KINDS[i % EXCLUSION_KINDS.len()] } else { StayKind::Normal };
        let stay_id = format!("{}", 200_001 + i);
        // exclusion stays get a fresh patient that is never reused, so each
        // rule fires exactly once per planted stay
        let reuse = kind == StayKind::Normal && !patients.is_empty() && rng.random_bool(spec.repeat_patient_fraction);
        let patient_id = if reuse {
            patients[rng.random_range(0..patients.len())].clone()
        } else {
            let id = format!("{}", 10_001 + i);
            if kind == StayKind::Normal {
                patients.push(id.clone());
            }
            id
        };
        let admit = start + Duration::minutes(rng.random_range(0..365 * 24 * 60));
        let z: [f64; N_LATENT] = std::array::from_fn(|_| normal(&mut rng));
        let mut levels = BTreeMap::new();

        let age = if kind == StayKind::Minor {
            rng.random_range(15.0..18.0)
        } else {
            level(&AGE, 100, &z, &mut rng)
        };
        levels.insert("age", age);
        let mut stay = StayRecord::new(&stay_id, &patient_id, admit, round2(age));
        let weight = round2(level(&WEIGHT, 101, &z, &mut rng));
        stay.demographics.insert("weight_kg".into(), weight);
        let height = level(&HEIGHT, 102, &z, &mut rng);
        if !rng.random_bool(miss("height_cm")) {
            stay.demographics.insert("height_cm".into(), round2(height));
            stay.demographics.insert("bmi".into(), round2(weight / (height / 100.0).powi(2)));
        }
        stay.demographics.insert("sex_male".into(), f64::from(rng.random_bool(0.55)));
        stay.demographics.insert("emergency".into(), f64::from(rng.random_bool(sigmoid(0.8 + 0.4 * z[0]))));

        for (k, m) in VITALS.iter().enumerate() {
            let lv = level(m, k, &z, &mut rng);
            levels.insert(m.name, lv);
            if rng.random_bool(miss(m.name)) {
                continue;
            }
            for h in VITAL_HOURS {
                let t = admit + Duration::hours(h) + Duration::minutes(rng.random_range(0..60));
                let v = (lv + 0.3 * m.sd * normal(&mut rng)).clamp(m.lo, m.hi);
                stay.events.push(Event { time: t, signal: m.name.into(), value: round2(v) });
            }
        }
        for (k, m) in LABS.iter().enumerate() {
            let lv = level(m, VITALS.len() + k, &z, &mut rng);
            levels.insert(m.name, lv);
            if m.name == CREATININE || rng.random_bool(miss(m.name)) {
                continue;
            }
            for h in LAB_HOURS {
                let t = admit + Duration::hours(h) + Duration::minutes(rng.random_range(0..60));
                let v = (lv + 0.15 * m.sd * normal(&mut rng)).clamp(m.lo, m.hi);
                stay.events.push(Event { time: t, signal: m.name.into(), value: round2(v) });
            }
        }
        if kind != StayKind::NoOutcomeData {
            let rate = (1.1 + 0.2 * normal(&mut rng)).max(0.7);
            for h in 0..24 {
                stay.urine.push((admit + Duration::hours(h) + Duration::minutes(30), round2(rate * weight)));
            }
        }
        if rng.random_bool(sigmoid(-1.0 + 0.5 * z[1])) {
            stay.ventilation.push(admit + Duration::hours(3));
        }

        let n_drugs = rng.random_range(1..=spec.max_drugs_per_stay);
        let first_hour = if kind == StayKind::NoFirstDayPrescription { 26 } else { 0 };
        let mut motif = false;
        for _ in 0..n_drugs {
            let d = rng.random_range(0..spec.catalog.len());
            let t = admit + Duration::hours(first_hour) + Duration::minutes(rng.random_range(0..23 * 60));
            motif |= motif_flags[d] && first_hour == 0;
            let record = present(&spec.catalog[d], &stay_id, &mut rng);
            stay.prescriptions.push(Prescription { start_time: t, drug: record });
        }
        // a later order never counts toward first-day features
        if rng.random_bool(0.2) {
            let d = rng.random_range(0..spec.catalog.len());
            let t = admit + Duration::hours(rng.random_range(30..70));
            let record = present(&spec.catalog[d], &stay_id, &mut rng);
            stay.prescriptions.push(Prescription { start_time: t, drug: record });
        }
        if kind == StayKind::PriorKidneyDisease {
            let code = if rng.random_bool(0.5) { "5849" } else { "N183" };
            diagnoses.push(Diagnosis {
                patient_id: patient_id.clone(),
                time: admit - Duration::days(rng.random_range(30..900)),
                icd_code: code.into(),
            });
        }
        // unrelated history
        if rng.random_bool(0.3) {
            diagnoses.push(Diagnosis {
                patient_id: patient_id.clone(),
                time: admit - Duration::days(rng.random_range(30..900)),
                icd_code: "4019".into(),
            });
        }

        let cohort_logit: f64 = LABEL_COEFFICIENTS
            .iter()
            .map(|(name, beta)| {
                let m = std::iter::once(&AGE).chain(&VITALS).chain(&LABS).find(|m| m.name == *name).unwrap();
                beta * (levels[name] - m.mean) / m.sd
            })
            .sum::<f64>()
            * spec.signal_strength;
        drafts.push(Draft { stay, kind, levels, cohort_logit, motif });
    }

    let motif_log_odds = spec.effect_odds.ln();
    let offsets: Vec<f64> = drafts
        .iter()
        .filter(|d| d.kind == StayKind::Normal)
        .map(|d| d.cohort_logit + motif_log_odds * f64::from(u8::from(d.motif)))
        .collect();
    let intercept = calibrate_intercept(&offsets, spec.prevalence);

    let mut labels = BTreeMap::new();
    let mut motif_exposed = BTreeMap::new();
    let mut oracle = (Vec::new(), Vec::new(), Vec::new());
    let mut exposed = 0usize;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    let mut stays = Vec::with_capacity(drafts.len());
    for mut d in drafts {
        let full = intercept + d.cohort_logit + motif_log_odds * f64::from(u8::from(d.motif));
        let y = u8::from(rng.random_bool(sigmoid(full)));
        let baseline = d.levels[CREATININE];
        if d.kind != StayKind::NoOutcomeData {
            write_creatinine(&mut d.stay, baseline, y, d.kind, &mut rng);
        }
        d.stay.sort_events();
        let kind_name = serde_json::to_value(d.kind).unwrap().as_str().unwrap().to_string();
        *kinds.entry(kind_name).or_default() += 1;
        if d.kind == StayKind::Normal {
            labels.insert(d.stay.stay_id.clone(), y);
            motif_exposed.insert(d.stay.stay_id.clone(), u8::from(d.motif));
            oracle.0.push(full);
            oracle.1.push(d.cohort_logit);
            oracle.2.push(y);
            exposed += usize::from(d.motif);
        }
        stays.push(d.stay);
    }
    for s in &mut stays {
        s.prior_aki_or_ckd = diagnoses
            .iter()
            .any(|d| d.patient_id == s.patient_id && d.time < s.admit_time && is_kidney_code(&d.icd_code));
    }
    let n_normal = oracle.2.len().max(1) as f64;
    let realized = oracle.2.iter().map(|&y| y as f64).sum::<f64>() / n_normal;
    let truth = GroundTruth {
        spec: spec.clone(),
        intercept,
        coefficients: LABEL_COEFFICIENTS.iter().map(|(k, v)| (k.to_string(), v * spec.signal_strength)).collect(),
        motif_log_odds,
        motif_drugs: spec
            .catalog
            .iter()
            .zip(&motif_flags)
            .filter(|(_, &m)| m)
            .map(|(d, _)| d.generic.clone())
            .collect(),
        stay_kinds: kinds,
        realized_prevalence: realized,
        motif_exposure: exposed as f64 / n_normal,
        oracle_auroc_full: auroc(&oracle.0, &oracle.2).unwrap_or(f64::NAN),
        oracle_auroc_cohort_only: auroc(&oracle.1, &oracle.2).unwrap_or(f64::NAN),
        labels,
        motif_exposed,
    };
    Ok(SyntheticCohort { stays, diagnoses, truth })
}

/// How a drug shows up in the prescriptions table. Most rows carry the
/// generic name; some only a free-text name; a few only an NDC behind an
/// unhelpful label.
fn present(d: &CatalogDrug, stay_id: &str, rng: &mut ChaCha8Rng) -> DrugRecord {
    let u: f64 = rng.random();
    if u < 0.75 {
        DrugRecord::new(format!("{} {}", d.generic, d.dose), Some(&d.generic), Some(&d.ndc), stay_id)
    } else if u < 0.9 {
        DrugRecord::new(format!("{} {}", d.generic, d.dose), None, None, stay_id)
    } else {
        DrugRecord::new(format!("Floor Stock Item {}", &d.ndc[7..]), None, Some(&d.ndc), stay_id)
    }
}

fn write_creatinine(stay: &mut StayRecord, baseline: f64, y: u8, kind: StayKind, rng: &mut ChaCha8Rng) {
    let admit = stay.admit_time;
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.04..0.04);
    let onset = match kind {
        StayKind::LateOnset => Some(86),
        _ if y == 1 => Some([26, 38, 50][rng.random_range(0..3)]),
        _ => None,
    };
    for h in LAB_HOURS.iter().chain(&CREATININE_LATER_HOURS) {
        let t = admit + Duration::hours(*h) + Duration::minutes(rng.random_range(0..30));
        let bump = match onset {
            Some(o) if *h >= o => rng.random_range(0.45..0.55),
            _ => 0.0,
        };
        let v = round2(baseline + jitter(rng) + bump);
        stay.events.push(Event { time: t, signal: CREATININE.into(), value: v });
    }
}

/// Compound and NDC answers for every catalog drug with a structure.
pub fn fixture_lines(catalog: &[CatalogDrug]) -> String {
    let mut out = String::new();
    for d in catalog {
        let Some(smiles) = &d.smiles else { continue };
        for name in [&d.generic, &d.brand] {
            out.push_str(&format!("{}\tresolved\t{smiles}\t\n", name.to_lowercase()));
        }
        out.push_str(&format!("{}\tresolved\t{}\t\n", ndc_key(&d.ndc), d.brand.to_uppercase()));
    }
    out
}

/// Writes the cohort CSVs, resolver fixtures and ground-truth manifest.
pub fn generate_synthetic(spec: &SynthSpec, dir: &Path) -> Result<GroundTruth, SpecError> {
    let cohort = generate_cohort(spec)?;
    write_cohort_dir(dir, &cohort.stays, &cohort.diagnoses)?;
    std::fs::write(dir.join(FIXTURES_FILE), fixture_lines(&spec.catalog))?;
    let json = serde_json::to_string_pretty(&cohort.truth).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(GROUND_TRUTH_FILE), json + "\n")?;
    Ok(cohort.truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::FeatureSchema;
    use crate::cohort::{Cohort, KdigoConfig};

    fn small(seed: u64) -> SynthSpec {
        SynthSpec { n_stays: 600, seed, ..SynthSpec::default() }
    }

    #[test]
    fn catalog_motif_membership() {
        let spec = SynthSpec::default();
        let flags = spec.motif_drugs().unwrap();
        let hits: Vec<&str> = spec
            .catalog
            .iter()
            .zip(&flags)
            .filter(|(_, &f)| f)
            .map(|(d, _)| d.generic.as_str())
            .collect();
        assert_eq!(
            hits,
            [
                "Ibuprofen",
                "Naproxen",
                "Diclofenac",
                "Ketorolac",
                "Ketoprofen",
                "Indomethacin",
                "Flurbiprofen",
                "Fenoprofen",
                "Tolmetin"
            ]
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_cohort(&small(7)).unwrap();
        let b = generate_cohort(&small(7)).unwrap();
        let c = generate_cohort(&small(8)).unwrap();
        assert_eq!(a.stays, b.stays);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.truth.labels, c.truth.labels);
    }

    #[test]
    fn intercept_hits_target_prevalence() {
        let offsets = [-1.0, 0.0, 0.5, 2.0];
        let b = calibrate_intercept(&offsets, 0.3);
        let mean = offsets.iter().map(|o| sigmoid(b + o)).sum::<f64>() / 4.0;
        assert!((mean - 0.3).abs() < 1e-9);
    }

    #[test]
    fn kdigo_reproduces_planted_labels_and_each_exclusion_fires() {
        let spec = SynthSpec { n_stays: 1000, seed: 3, ..SynthSpec::default() };
        let cohort = generate_cohort(&spec).unwrap();
        let truth = cohort.truth.clone();
        let built = Cohort::build(cohort.stays, &KdigoConfig::default(), &FeatureSchema::default_schema()).unwrap();
        let counts = &built.manifest.excluded;
        // one exclusion kind in five: 50 stays over five kinds
        assert_eq!(counts.under_18, 10);
        assert_eq!(counts.onset_after_window, 10);
        assert_eq!(counts.insufficient_data, 10);
        assert_eq!(counts.prior_aki_or_ckd, 10);
        let after_exclusions = built.manifest.funnel[4].stays;
        let total = counts.prior_aki_or_ckd + counts.under_18 + counts.onset_after_window + counts.insufficient_data;
        assert_eq!(after_exclusions + total, 1000);
        assert!(after_exclusions - built.stays.len() >= 10);
        for s in &built.stays {
            assert_eq!(truth.labels.get(&s.stay.stay_id), Some(&s.aki.label), "{}", s.stay.stay_id);
        }
        assert!((truth.realized_prevalence - spec.prevalence).abs() < 0.05);
        assert!(truth.oracle_auroc_full > truth.oracle_auroc_cohort_only);
    }

    #[test]
    fn fixtures_cover_structured_drugs_only() {
        let lines = fixture_lines(&default_catalog());
        assert!(lines.contains("ibuprofen\tresolved\t"));
        assert!(lines.contains("ndc:50580049660\tresolved\tMOTRIN\t"));
        assert!(!lines.to_lowercase().contains("nx-17"));
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SynthSpec { prevalence: 1.0, ..small(0) },
            SynthSpec { n_stays: 3, ..small(0) },
            SynthSpec { motif: "c(".into(), ..small(0) },
            SynthSpec { catalog: vec![], ..small(0) },
        ] {
            assert!(matches!(generate_cohort(&spec), Err(SpecError::Invalid(_))));
        }
    }
}
