//! KDIGO stage-1 acute kidney injury labelling and cohort exclusions.

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ingest::StayRecord;

pub const CREATININE: &str = "creatinine";

// float slack so that 1.0 -> 1.3 counts as a rise of 0.3
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdigoConfig {
    /// Absolute serum-creatinine rise in mg/dL.
    pub scr_abs_increase: f64,
    /// Span in hours over which the absolute rise is measured.
    pub scr_abs_window_hours: f64,
    /// Ratio against the first in-stay creatinine.
    pub scr_rel_increase: f64,
    /// Urine output in mL/kg/h.
    pub urine_rate_threshold: f64,
    pub urine_sustained_hours: u32,
    /// Hours after admission during which onset counts as a positive label.
    pub label_window_hours: f64,
}

impl Default for KdigoConfig {
    fn default() -> Self {
        KdigoConfig {
            scr_abs_increase: 0.3,
            scr_abs_window_hours: 48.0,
            scr_rel_increase: 1.5,
            urine_rate_threshold: 0.5,
            urine_sustained_hours: 6,
            label_window_hours: 72.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KdigoError {
    #[error("invalid KDIGO config: {0}")]
    Config(String),
    #[error("stay {0:?} has no creatinine and no urine data")]
    InsufficientData(String),
}

impl KdigoConfig {
    pub fn validate(&self) -> Result<(), KdigoError> {
        let positive = [
            ("scr_abs_increase", self.scr_abs_increase),
            ("scr_abs_window_hours", self.scr_abs_window_hours),
            ("scr_rel_increase", self.scr_rel_increase),
            ("urine_rate_threshold", self.urine_rate_threshold),
            ("urine_sustained_hours", self.urine_sustained_hours as f64),
            ("label_window_hours", self.label_window_hours),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(KdigoError::Config(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    fn window_end(&self, admit: NaiveDateTime) -> NaiveDateTime {
        admit + Duration::seconds((self.label_window_hours * 3600.0).round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AkiCriterion {
    CreatinineAbsolute,
    CreatinineRelative,
    Oliguria,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AkiLabel {
    /// 1 when onset falls within the label window.
    pub label: u8,
    /// Earliest qualifying time, which may lie after the window.
    pub onset: Option<NaiveDateTime>,
    pub criterion: Option<AkiCriterion>,
}

fn creatinine_onset(stay: &StayRecord, cfg: &KdigoConfig) -> Option<(NaiveDateTime, AkiCriterion)> {
    let series: Vec<(NaiveDateTime, f64)> = stay
        .events
        .iter()
        .filter(|e| e.signal == CREATININE && e.time >= stay.admit_time)
        .map(|e| (e.time, e.value))
        .collect();
    let &(_, baseline) = series.first()?;
    let span = Duration::seconds((cfg.scr_abs_window_hours * 3600.0).round() as i64);
    for (j, &(tj, vj)) in series.iter().enumerate() {
        let abs = series[..j]
            .iter()
            .any(|&(ti, vi)| tj - ti <= span && vj - vi >= cfg.scr_abs_increase - EPS);
        if abs {
            return Some((tj, AkiCriterion::CreatinineAbsolute));
        }
        if vj >= cfg.scr_rel_increase * baseline - EPS {
            return Some((tj, AkiCriterion::CreatinineRelative));
        }
    }
    None
}

/// Hourly urine buckets from admission to the hour of the last urine
/// record; hours with no record count as zero output.
fn oliguria_onset(stay: &StayRecord, cfg: &KdigoConfig) -> Option<NaiveDateTime> {
    let weight = stay.weight_kg()?;
    let in_stay: Vec<_> = stay.urine.iter().filter(|(t, _)| *t >= stay.admit_time).collect();
    let last = in_stay.iter().map(|(t, _)| *t).max()?;
    let n_buckets = (last - stay.admit_time).num_hours() as usize + 1;
    let mut buckets = vec![0.0; n_buckets];
    for (t, v) in in_stay {
        buckets[(*t - stay.admit_time).num_hours() as usize] += v;
    }
    let need = cfg.urine_sustained_hours as usize;
    let mut run = 0;
    for (h, ml) in buckets.iter().enumerate() {
        if ml / weight < cfg.urine_rate_threshold - EPS {
            run += 1;
            if run >= need {
                return Some(stay.admit_time + Duration::hours(h as i64 + 1));
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Pure function of the stay and config.
pub fn label_aki(stay: &StayRecord, cfg: &KdigoConfig) -> Result<AkiLabel, KdigoError> {
    let has_scr = stay
        .events
        .iter()
        .any(|e| e.signal == CREATININE && e.time >= stay.admit_time);
    let has_urine = stay.urine.iter().any(|(t, _)| *t >= stay.admit_time);
    if !has_scr && !has_urine {
        return Err(KdigoError::InsufficientData(stay.stay_id.clone()));
    }
    let scr = creatinine_onset(stay, cfg);
    let urine = oliguria_onset(stay, cfg).map(|t| (t, AkiCriterion::Oliguria));
    let first = match (scr, urine) {
        (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
        (a, b) => a.or(b),
    };
    let label = match first {
        Some((t, _)) if t <= cfg.window_end(stay.admit_time) => 1,
        _ => 0,
    };
    Ok(AkiLabel {
        label,
        onset: first.map(|f| f.0),
        criterion: first.map(|f| f.1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStay {
    pub stay: StayRecord,
    pub aki: AkiLabel,
}

impl AsRef<StayRecord> for LabeledStay {
    fn as_ref(&self) -> &StayRecord {
        &self.stay
    }
}

/// Stay and distinct-patient count after one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStage {
    pub stage: String,
    pub stays: usize,
    pub patients: usize,
}

impl FunnelStage {
    pub fn count<S: AsRef<StayRecord>>(stage: &str, stays: &[S]) -> Self {
        let patients: std::collections::HashSet<&str> =
            stays.iter().map(|s| s.as_ref().patient_id.as_str()).collect();
        FunnelStage {
            stage: stage.to_string(),
            stays: stays.len(),
            patients: patients.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub prior_aki_or_ckd: usize,
    pub under_18: usize,
    pub onset_after_window: usize,
    pub insufficient_data: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionOutcome {
    pub included: Vec<LabeledStay>,
    pub excluded: ExclusionCounts,
    pub funnel: Vec<FunnelStage>,
}

/// Each stay is counted once, at the first criterion it fails, checked in
/// the order: kidney history, age, late onset, missing outcome data.
pub fn apply_exclusions(stays: Vec<StayRecord>, cfg: &KdigoConfig) -> Result<ExclusionOutcome, KdigoError> {
    cfg.validate()?;
    let mut funnel = vec![FunnelStage::count("all stays", &stays)];
    let mut excluded = ExclusionCounts::default();

    let stays: Vec<StayRecord> = stays
        .into_iter()
        .filter(|s| {
            let keep = !s.prior_aki_or_ckd;
            excluded.prior_aki_or_ckd += usize::from(!keep);
            keep
        })
        .collect();
    funnel.push(FunnelStage::count("no prior AKI/CKD", &stays));

    let stays: Vec<StayRecord> = stays
        .into_iter()
        .filter(|s| {
            let keep = s.age >= 18.0;
            excluded.under_18 += usize::from(!keep);
            keep
        })
        .collect();
    funnel.push(FunnelStage::count("age >= 18", &stays));

    let mut pending: Vec<(StayRecord, Result<AkiLabel, KdigoError>)> = Vec::with_capacity(stays.len());
    for stay in stays {
        let label = label_aki(&stay, cfg);
        match &label {
            Ok(aki) if aki.label == 0 && aki.onset.is_some() => excluded.onset_after_window += 1,
            _ => pending.push((stay, label)),
        }
    }
    let remaining: Vec<&StayRecord> = pending.iter().map(|p| &p.0).collect();
    funnel.push(FunnelStage::count("AKI onset within window", &remaining));

    let mut labeled = Vec::with_capacity(pending.len());
    for (stay, label) in pending {
        match label {
            Ok(aki) => labeled.push(LabeledStay { stay, aki }),
            Err(KdigoError::InsufficientData(_)) => excluded.insufficient_data += 1,
            Err(e) => return Err(e),
        }
    }
    funnel.push(FunnelStage::count("outcome data present", &labeled));
    Ok(ExclusionOutcome {
        included: labeled,
        excluded,
        funnel,
    })
}

/// Keeps stays with at least one prescription starting in the first 24 h.
pub fn filter_first_day_prescription<S: AsRef<StayRecord>>(stays: Vec<S>) -> (Vec<S>, FunnelStage) {
    let kept: Vec<S> = stays
        .into_iter()
        .filter(|s| s.as_ref().first_day_prescriptions().next().is_some())
        .collect();
    let stage = FunnelStage::count("first-day prescription", &kept);
    (kept, stage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::ingest::{parse_time, Event, Prescription};
    use crate::resolver::DrugRecord;

    fn t(h: f64) -> NaiveDateTime {
        parse_time("2150-03-01T08:00:00").unwrap() + Duration::seconds((h * 3600.0) as i64)
    }

    fn stay(id: &str, age: f64) -> StayRecord {
        let mut s = StayRecord::new(id, &format!("p{id}"), t(0.0), age);
        s.demographics.insert("weight_kg".into(), 70.0);
        s
    }

    fn scr(s: &mut StayRecord, pts: &[(f64, f64)]) {
        for &(h, v) in pts {
            s.events.push(Event { time: t(h), signal: CREATININE.into(), value: v });
        }
    }

    fn urine_rate(s: &mut StayRecord, hours: std::ops::Range<u32>, ml_kg_h: f64) {
        for h in hours {
            s.urine.push((t(h as f64 + 0.5), ml_kg_h * 70.0));
        }
    }

    #[test]
    fn absolute_rise_within_48h() {
        let mut s = stay("1", 50.0);
        scr(&mut s, &[(0.0, 1.0), (24.0, 1.4)]);
        let l = label_aki(&s, &KdigoConfig::default()).unwrap();
        assert_eq!(l.label, 1);
        assert_eq!(l.onset, Some(t(24.0)));
        assert_eq!(l.criterion, Some(AkiCriterion::CreatinineAbsolute));
    }

    #[test]
    fn exact_threshold_rise_counts() {
        let mut s = stay("1", 50.0);
        scr(&mut s, &[(0.0, 1.0), (10.0, 1.3)]);
        assert_eq!(label_aki(&s, &KdigoConfig::default()).unwrap().label, 1);
    }

    #[test]
    fn slow_rise_needs_relative_criterion() {
        let mut s = stay("1", 50.0);
        // +0.2 per 49 h never gives 0.3 inside 48 h; 1.0 -> 1.4 is below 1.5x
        scr(&mut s, &[(0.0, 1.0), (49.0, 1.2), (98.0, 1.4)]);
        let l = label_aki(&s, &KdigoConfig::default()).unwrap();
        assert_eq!((l.label, l.onset), (0, None));
        let mut s = stay("2", 50.0);
        scr(&mut s, &[(0.0, 0.4), (49.0, 0.5), (60.0, 0.6)]);
        let l = label_aki(&s, &KdigoConfig::default()).unwrap();
        assert_eq!(l.criterion, Some(AkiCriterion::CreatinineRelative));
        assert_eq!(l.onset, Some(t(60.0)));
    }

    #[test]
    fn flat_series_is_negative() {
        let mut s = stay("1", 50.0);
        scr(&mut s, &[(0.0, 1.0), (24.0, 1.0), (48.0, 1.0)]);
        urine_rate(&mut s, 0..72, 1.2);
        assert_eq!(label_aki(&s, &KdigoConfig::default()).unwrap(), AkiLabel {
            label: 0,
            onset: None,
            criterion: None
        });
    }

    #[test]
    fn oliguria_needs_six_consecutive_hours() {
        let mut s = stay("1", 50.0);
        urine_rate(&mut s, 0..10, 1.0);
        urine_rate(&mut s, 10..15, 0.3);
        urine_rate(&mut s, 15..20, 1.0);
        assert_eq!(label_aki(&s, &KdigoConfig::default()).unwrap().label, 0);
        urine_rate(&mut s, 20..26, 0.3);
        let l = label_aki(&s, &KdigoConfig::default()).unwrap();
        assert_eq!((l.label, l.onset), (1, Some(t(26.0))));
        assert_eq!(l.criterion, Some(AkiCriterion::Oliguria));
    }

    #[test]
    fn late_jump_is_outside_window() {
        let mut s = stay("1", 50.0);
        scr(&mut s, &[(0.0, 1.0), (70.0, 1.0), (80.0, 1.5)]);
        let l = label_aki(&s, &KdigoConfig::default()).unwrap();
        assert_eq!((l.label, l.onset), (0, Some(t(80.0))));
    }

    #[test]
    fn no_outcome_data() {
        let s = stay("1", 50.0);
        assert_eq!(
            label_aki(&s, &KdigoConfig::default()),
            Err(KdigoError::InsufficientData("1".into()))
        );
    }

    /// Ten stays with a hand-enumerated funnel.
    #[test]
    fn ten_stay_funnel() {
        let mut stays = Vec::new();
        for i in 0..10 {
            let mut s = stay(&i.to_string(), 40.0);
            scr(&mut s, &[(0.0, 1.0), (30.0, 1.0)]);
            stays.push(s);
        }
        stays[0].prior_aki_or_ckd = true;
        stays[1].prior_aki_or_ckd = true;
        stays[1].age = 16.0; // first failing criterion is the history
        stays[2].age = 17.9;
        scr(&mut stays[3], &[(90.0, 2.0)]);
        stays[3].sort_events();
        stays[4].events.clear();
        scr(&mut stays[5], &[(40.0, 1.6)]);
        stays[5].sort_events();
        // same patient for two included stays
        stays[7].patient_id = stays[6].patient_id.clone();

        let out = apply_exclusions(stays, &KdigoConfig::default()).unwrap();
        assert_eq!(out.excluded, ExclusionCounts {
            prior_aki_or_ckd: 2,
            under_18: 1,
            onset_after_window: 1,
            insufficient_data: 1,
        });
        let counts: Vec<_> = out.funnel.iter().map(|f| (f.stays, f.patients)).collect();
        assert_eq!(counts, [(10, 9), (8, 7), (7, 6), (6, 5), (5, 4)]);
        let labels: Vec<_> = out.included.iter().map(|l| (l.stay.stay_id.as_str(), l.aki.label)).collect();
        assert_eq!(labels, [("5", 1), ("6", 0), ("7", 0), ("8", 0), ("9", 0)]);
    }

    #[test]
    fn first_day_prescription_window() {
        let rx = |h: f64| Prescription {
            start_time: t(h),
            drug: DrugRecord::new("x", None, None, "s"),
        };
        let mut a = stay("a", 40.0);
        a.prescriptions.push(rx(1.0));
        let mut b = stay("b", 40.0);
        b.prescriptions.push(rx(25.0));
        let mut c = stay("c", 40.0);
        c.prescriptions.push(rx(-2.0));
        let mut d = stay("d", 40.0);
        d.prescriptions.push(rx(24.0));
        let (kept, stage) = filter_first_day_prescription(vec![a, b, c, d]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].stay_id, "a");
        assert_eq!((stage.stays, stage.patients), (1, 1));
    }
}
