//! One CSV per table, UTF-8 with a header row and ISO-8601 timestamps.
//!
//! | file | columns |
//! |---|---|
//! | `stays.csv` | `stay_id,patient_id,admit_time` |
//! | `demographics.csv` | `stay_id,age,sex_male,weight_kg,height_cm,bmi,emergency` |
//! | `chartevents.csv` | `stay_id,time,signal,value` |
//! | `labevents.csv` | `stay_id,time,signal,value` |
//! | `outputevents.csv` | `stay_id,time,value_ml` |
//! | `ventilation.csv` | `stay_id,time` |
//! | `diagnoses.csv` | `patient_id,time,icd_code` |
//! | `prescriptions.csv` | `stay_id,start_time,drug_name,generic_name,ndc` |
//!
//! Empty demographic cells are missing values. Units are taken as given.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resolver::DrugRecord;

pub const STAYS: &str = "stays.csv";
pub const DEMOGRAPHICS: &str = "demographics.csv";
pub const CHARTEVENTS: &str = "chartevents.csv";
pub const LABEVENTS: &str = "labevents.csv";
pub const OUTPUTEVENTS: &str = "outputevents.csv";
pub const VENTILATION: &str = "ventilation.csv";
pub const DIAGNOSES: &str = "diagnoses.csv";
pub const PRESCRIPTIONS: &str = "prescriptions.csv";

/// ICD-9 (584 acute, 585 chronic) and ICD-10 (N17, N18) kidney codes.
pub const KIDNEY_ICD_PREFIXES: [&str; 4] = ["584", "585", "N17", "N18"];

const DEMOGRAPHIC_FIELDS: [&str; 6] = ["age", "sex_male", "weight_kg", "height_cm", "bmi", "emergency"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: bad timestamp {value:?}")]
    Timestamp { file: String, value: String },
    #[error("{file}: unknown stay_id {stay_id:?}")]
    UnknownStay { file: String, stay_id: String },
    #[error("duplicate stay_id {0:?}")]
    DuplicateStay(String),
    #[error("stay {stay_id:?}: {message}")]
    Invalid { stay_id: String, message: String },
}

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_time(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: NaiveDateTime,
    pub signal: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prescription {
    pub start_time: NaiveDateTime,
    pub drug: DrugRecord,
}

/// Everything known about one ICU stay.
#[derive(Debug, Clone, PartialEq)]
pub struct StayRecord {
    pub stay_id: String,
    pub patient_id: String,
    pub admit_time: NaiveDateTime,
    pub age: f64,
    /// Demographic fields other than age; absent keys are missing.
    pub demographics: BTreeMap<String, f64>,
    pub prior_aki_or_ckd: bool,
    /// Chart and lab measurements, sorted by time.
    pub events: Vec<Event>,
    /// Urine output in mL, sorted by time.
    pub urine: Vec<(NaiveDateTime, f64)>,
    pub ventilation: Vec<NaiveDateTime>,
    pub prescriptions: Vec<Prescription>,
}

impl StayRecord {
    pub fn new(stay_id: &str, patient_id: &str, admit_time: NaiveDateTime, age: f64) -> Self {
        StayRecord {
            stay_id: stay_id.to_string(),
            patient_id: patient_id.to_string(),
            admit_time,
            age,
            demographics: BTreeMap::new(),
            prior_aki_or_ckd: false,
            events: Vec::new(),
            urine: Vec::new(),
            ventilation: Vec::new(),
            prescriptions: Vec::new(),
        }
    }

    pub fn weight_kg(&self) -> Option<f64> {
        self.demographics.get("weight_kg").copied().filter(|w| *w > 0.0)
    }

    pub fn demographic(&self, field: &str) -> Option<f64> {
        if field == "age" {
            Some(self.age)
        } else {
            self.demographics.get(field).copied()
        }
    }

    pub fn hours_since_admit(&self, t: NaiveDateTime) -> f64 {
        (t - self.admit_time).num_seconds() as f64 / 3600.0
    }

    /// True when `t` lies in `[admit, admit + 24 h)`.
    pub fn in_first_day(&self, t: NaiveDateTime) -> bool {
        t >= self.admit_time && t < self.admit_time + Duration::hours(24)
    }

    pub fn first_day_prescriptions(&self) -> impl Iterator<Item = &Prescription> {
        self.prescriptions.iter().filter(|p| self.in_first_day(p.start_time))
    }

    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|a| a.time);
        self.urine.sort_by_key(|a| a.0);
        self.ventilation.sort();
        self.prescriptions.sort_by_key(|a| a.start_time);
    }
}

impl AsRef<StayRecord> for StayRecord {
    fn as_ref(&self) -> &StayRecord {
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StayRow {
    stay_id: String,
    patient_id: String,
    admit_time: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemographicsRow {
    stay_id: String,
    age: f64,
    sex_male: Option<f64>,
    weight_kg: Option<f64>,
    height_cm: Option<f64>,
    bmi: Option<f64>,
    emergency: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    stay_id: String,
    time: String,
    signal: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutputRow {
    stay_id: String,
    time: String,
    value_ml: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct VentRow {
    stay_id: String,
    time: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagnosisRow {
    patient_id: String,
    time: String,
    icd_code: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrescriptionRow {
    stay_id: String,
    start_time: String,
    drug_name: String,
    generic_name: Option<String>,
    ndc: Option<String>,
}

fn rows<R: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<Vec<R>, IngestError> {
    let path = dir.join(file);
    let f = File::open(&path).map_err(|source| IngestError::Io { path: path.clone(), source })?;
    csv::Reader::from_reader(BufReader::new(f))
        .deserialize()
        .collect::<Result<Vec<R>, _>>()
        .map_err(|source| IngestError::Csv { path, source })
}

fn time(file: &str, value: &str) -> Result<NaiveDateTime, IngestError> {
    parse_time(value).ok_or_else(|| IngestError::Timestamp {
        file: file.to_string(),
        value: value.to_string(),
    })
}

pub fn is_kidney_code(code: &str) -> bool {
    let code = code.trim().to_ascii_uppercase().replace('.', "");
    KIDNEY_ICD_PREFIXES.iter().any(|p| code.starts_with(p))
}

/// Reads all eight tables from `dir` and joins them per stay, in the order
/// of `stays.csv`.
pub fn read_cohort_dir(dir: &Path) -> Result<Vec<StayRecord>, IngestError> {
    let mut stays = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rows::<StayRow>(dir, STAYS)? {
        if index.insert(row.stay_id.clone(), stays.len()).is_some() {
            return Err(IngestError::DuplicateStay(row.stay_id));
        }
        // age is filled from demographics below; NaN marks it unseen
        stays.push(StayRecord::new(&row.stay_id, &row.patient_id, time(STAYS, &row.admit_time)?, f64::NAN));
    }
    let lookup = |file: &str, id: &str| {
        index.get(id).copied().ok_or_else(|| IngestError::UnknownStay {
            file: file.to_string(),
            stay_id: id.to_string(),
        })
    };

    for row in rows::<DemographicsRow>(dir, DEMOGRAPHICS)? {
        let s = &mut stays[lookup(DEMOGRAPHICS, &row.stay_id)?];
        if !(row.age >= 0.0) {
            return Err(IngestError::Invalid {
                stay_id: row.stay_id,
                message: format!("age {} is negative", row.age),
            });
        }
        s.age = row.age;
        let optional = [row.sex_male, row.weight_kg, row.height_cm, row.bmi, row.emergency];
        for (name, v) in DEMOGRAPHIC_FIELDS[1..].iter().zip(optional) {
            if let Some(v) = v {
                s.demographics.insert(name.to_string(), v);
            }
        }
    }
    if let Some(s) = stays.iter().find(|s| s.age.is_nan()) {
        return Err(IngestError::Invalid {
            stay_id: s.stay_id.clone(),
            message: "no demographics row".into(),
        });
    }

    for file in [CHARTEVENTS, LABEVENTS] {
        for row in rows::<EventRow>(dir, file)? {
            let i = lookup(file, &row.stay_id)?;
            stays[i].events.push(Event {
                time: time(file, &row.time)?,
                signal: row.signal,
                value: row.value,
            });
        }
    }
    for row in rows::<OutputRow>(dir, OUTPUTEVENTS)? {
        let i = lookup(OUTPUTEVENTS, &row.stay_id)?;
        stays[i].urine.push((time(OUTPUTEVENTS, &row.time)?, row.value_ml));
    }
    for row in rows::<VentRow>(dir, VENTILATION)? {
        let i = lookup(VENTILATION, &row.stay_id)?;
        stays[i].ventilation.push(time(VENTILATION, &row.time)?);
    }
    for row in rows::<PrescriptionRow>(dir, PRESCRIPTIONS)? {
        let i = lookup(PRESCRIPTIONS, &row.stay_id)?;
        let drug = DrugRecord::new(row.drug_name, row.generic_name.as_deref(), row.ndc.as_deref(), &row.stay_id);
        stays[i].prescriptions.push(Prescription {
            start_time: time(PRESCRIPTIONS, &row.start_time)?,
            drug,
        });
    }

    let mut kidney_history: HashMap<String, Vec<NaiveDateTime>> = HashMap::new();
    for row in rows::<DiagnosisRow>(dir, DIAGNOSES)? {
        if is_kidney_code(&row.icd_code) {
            kidney_history
                .entry(row.patient_id)
                .or_default()
                .push(time(DIAGNOSES, &row.time)?);
        }
    }
    for s in &mut stays {
        s.prior_aki_or_ckd = kidney_history
            .get(&s.patient_id)
            .is_some_and(|ts| ts.iter().any(|t| *t < s.admit_time));
        s.sort_events();
    }
    Ok(stays)
}

/// Diagnosis history is per patient, so it is written separately from the
/// stays it affects.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub patient_id: String,
    pub time: NaiveDateTime,
    pub icd_code: String,
}

fn writer(dir: &Path, file: &str) -> Result<csv::Writer<BufWriter<File>>, IngestError> {
    let path = dir.join(file);
    let f = File::create(&path).map_err(|source| IngestError::Io { path, source })?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// Writes stays and diagnoses in the layout `read_cohort_dir` expects.
/// `prior_aki_or_ckd` is not written; it is derived from `diagnoses`.
pub fn write_cohort_dir(dir: &Path, stays: &[StayRecord], diagnoses: &[Diagnosis]) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv_err = |file: &str| {
        let path = dir.join(file);
        move |source: csv::Error| IngestError::Csv { path: path.clone(), source }
    };
    let io_err = |file: &str| {
        let path = dir.join(file);
        move |source: std::io::Error| IngestError::Io { path: path.clone(), source }
    };

    let mut w = writer(dir, STAYS)?;
    for s in stays {
        w.serialize(StayRow {
            stay_id: s.stay_id.clone(),
            patient_id: s.patient_id.clone(),
            admit_time: format_time(s.admit_time),
        })
        .map_err(csv_err(STAYS))?;
    }
    w.flush().map_err(io_err(STAYS))?;

    let mut w = writer(dir, DEMOGRAPHICS)?;
    for s in stays {
        let d = |k: &str| s.demographics.get(k).copied();
        w.serialize(DemographicsRow {
            stay_id: s.stay_id.clone(),
            age: s.age,
            sex_male: d("sex_male"),
            weight_kg: d("weight_kg"),
            height_cm: d("height_cm"),
            bmi: d("bmi"),
            emergency: d("emergency"),
        })
        .map_err(csv_err(DEMOGRAPHICS))?;
    }
    w.flush().map_err(io_err(DEMOGRAPHICS))?;

    // chart vs lab split is cosmetic for the reader; creatinine and other
    // labs go to labevents
    let mut chart = writer(dir, CHARTEVENTS)?;
    let mut lab = writer(dir, LABEVENTS)?;
    chart.write_record(["stay_id", "time", "signal", "value"]).map_err(csv_err(CHARTEVENTS))?;
    lab.write_record(["stay_id", "time", "signal", "value"]).map_err(csv_err(LABEVENTS))?;
    for s in stays {
        for e in &s.events {
            let (w, file) = if super::schema::is_vital(&e.signal) {
                (&mut chart, CHARTEVENTS)
            } else {
                (&mut lab, LABEVENTS)
            };
            w.write_record([&s.stay_id, &format_time(e.time), &e.signal, &e.value.to_string()])
                .map_err(csv_err(file))?;
        }
    }
    chart.flush().map_err(io_err(CHARTEVENTS))?;
    lab.flush().map_err(io_err(LABEVENTS))?;

    let mut w = writer(dir, OUTPUTEVENTS)?;
    w.write_record(["stay_id", "time", "value_ml"]).map_err(csv_err(OUTPUTEVENTS))?;
    for s in stays {
        for (t, v) in &s.urine {
            w.write_record([&s.stay_id, &format_time(*t), &v.to_string()])
                .map_err(csv_err(OUTPUTEVENTS))?;
        }
    }
    w.flush().map_err(io_err(OUTPUTEVENTS))?;

    let mut w = writer(dir, VENTILATION)?;
    w.write_record(["stay_id", "time"]).map_err(csv_err(VENTILATION))?;
    for s in stays {
        for t in &s.ventilation {
            w.write_record([&s.stay_id, &format_time(*t)]).map_err(csv_err(VENTILATION))?;
        }
    }
    w.flush().map_err(io_err(VENTILATION))?;

    let mut w = writer(dir, DIAGNOSES)?;
    w.write_record(["patient_id", "time", "icd_code"]).map_err(csv_err(DIAGNOSES))?;
    for d in diagnoses {
        w.write_record([&d.patient_id, &format_time(d.time), &d.icd_code])
            .map_err(csv_err(DIAGNOSES))?;
    }
    w.flush().map_err(io_err(DIAGNOSES))?;

    let mut w = writer(dir, PRESCRIPTIONS)?;
    w.write_record(["stay_id", "start_time", "drug_name", "generic_name", "ndc"])
        .map_err(csv_err(PRESCRIPTIONS))?;
    for s in stays {
        for p in &s.prescriptions {
            w.write_record([
                s.stay_id.as_str(),
                &format_time(p.start_time),
                &p.drug.drug_name,
                p.drug.generic_name.as_deref().unwrap_or(""),
                p.drug.ndc.as_deref().unwrap_or(""),
            ])
            .map_err(csv_err(PRESCRIPTIONS))?;
        }
    }
    w.flush().map_err(io_err(PRESCRIPTIONS))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: i64) -> NaiveDateTime {
        parse_time("2150-03-01T08:00:00").unwrap() + Duration::hours(h)
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_time("2150-03-01 08:00:00"), Some(t(0)));
        assert_eq!(format_time(t(25)), "2150-03-02T09:00:00");
        assert_eq!(parse_time("03/01/2150"), None);
    }

    #[test]
    fn kidney_codes() {
        assert!(is_kidney_code("5849"));
        assert!(is_kidney_code("N18.3"));
        assert!(is_kidney_code("n17"));
        assert!(!is_kidney_code("4019"));
    }

    #[test]
    fn round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = StayRecord::new("1", "p1", t(0), 64.5);
        a.demographics.insert("weight_kg".into(), 80.0);
        a.demographics.insert("sex_male".into(), 1.0);
        a.events.push(Event { time: t(2), signal: "hr".into(), value: 88.0 });
        a.events.push(Event { time: t(3), signal: "creatinine".into(), value: 1.1 });
        a.urine.push((t(1), 60.0));
        a.ventilation.push(t(4));
        a.prescriptions.push(Prescription {
            start_time: t(1),
            drug: DrugRecord::new("Aspirin 81mg", Some("aspirin"), None, "1"),
        });
        let b = StayRecord::new("2", "p2", t(100), 30.0);
        let dx = vec![
            Diagnosis { patient_id: "p1".into(), time: t(-500), icd_code: "5859".into() },
            Diagnosis { patient_id: "p2".into(), time: t(200), icd_code: "N179".into() },
        ];
        write_cohort_dir(dir.path(), &[a.clone(), b.clone()], &dx).unwrap();
        let back = read_cohort_dir(dir.path()).unwrap();
        a.prior_aki_or_ckd = true;
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn unknown_stay_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_cohort_dir(dir.path(), &[StayRecord::new("1", "p", t(0), 50.0)], &[]).unwrap();
        std::fs::write(dir.path().join(VENTILATION), "stay_id,time\n9,2150-03-01T09:00:00\n").unwrap();
        assert!(matches!(
            read_cohort_dir(dir.path()),
            Err(IngestError::UnknownStay { .. })
        ));
    }
}
