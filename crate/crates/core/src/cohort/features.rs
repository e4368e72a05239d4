use rayon::prelude::*;

use super::ingest::StayRecord;
use super::kdigo::LabeledStay;
use super::matrix::{FeatureMatrix, MatrixError};
use super::schema::{Aggregation, ColumnSpec, FeatureSchema, SchemaError, Source};
use crate::Scalar;

fn aggregate(values: &[f64], agg: Aggregation) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(match agg {
        Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Sum => values.iter().sum(),
        Aggregation::Any | Aggregation::Value => unreachable!("not a series aggregation"),
    })
}

fn cell(stay: &StayRecord, spec: &ColumnSpec) -> Option<f64> {
    match spec.source {
        Source::Demographic => stay.demographic(&spec.signal),
        Source::Event => {
            let values: Vec<f64> = stay
                .events
                .iter()
                .filter(|e| e.signal == spec.signal && stay.in_first_day(e.time))
                .map(|e| e.value)
                .collect();
            aggregate(&values, spec.aggregation)
        }
        Source::Urine => {
            let values: Vec<f64> = stay
                .urine
                .iter()
                .filter(|(t, _)| stay.in_first_day(*t))
                .map(|(_, v)| *v)
                .collect();
            aggregate(&values, spec.aggregation)
        }
        // a stay with no ventilation record was not ventilated
        Source::Ventilation => Some(if stay.ventilation.iter().any(|t| stay.in_first_day(*t)) {
            1.0
        } else {
            0.0
        }),
    }
}

/// One feature row over `[admit, admit + 24 h)`; `None` marks a signal with
/// no observation in the window.
pub fn extract_first_day_features(stay: &StayRecord, schema: &FeatureSchema) -> Result<Vec<Option<f64>>, SchemaError> {
    let specs = schema.column_specs()?;
    Ok(specs.iter().map(|spec| cell(stay, spec)).collect())
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Extracts every stay in parallel and assembles the labelled matrix in
/// input order.
pub fn build_feature_matrix<T: Scalar>(
    stays: &[LabeledStay],
    schema: &FeatureSchema,
) -> Result<FeatureMatrix<T>, FeatureError> {
    let specs = schema.column_specs()?;
    let rows: Vec<Vec<Option<f64>>> = stays
        .par_iter()
        .map(|s| specs.iter().map(|spec| cell(&s.stay, spec)).collect())
        .collect();
    let cells = rows.into_iter().flatten().map(|v| v.map(T::of)).collect();
    Ok(FeatureMatrix::new(
        specs.into_iter().map(|s| s.column).collect(),
        stays.iter().map(|s| s.stay.stay_id.clone()).collect(),
        cells,
        stays.iter().map(|s| s.aki.label).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::ingest::{parse_time, Event};
    use chrono::{Duration, NaiveDateTime};

    fn t(min: i64) -> NaiveDateTime {
        parse_time("2150-03-01T08:00:00").unwrap() + Duration::minutes(min)
    }

    fn value(schema: &FeatureSchema, row: &[Option<f64>], name: &str) -> Option<f64> {
        let i = schema.columns().unwrap().iter().position(|c| c.name == name).unwrap();
        row[i]
    }

    fn ev(s: &mut StayRecord, min: i64, signal: &str, v: f64) {
        s.events.push(Event { time: t(min), signal: signal.into(), value: v });
    }

    #[test]
    fn vitals_aggregate_and_missing_labs_mask() {
        let schema = FeatureSchema::default_schema();
        let mut s = StayRecord::new("1", "p", t(0), 55.0);
        for (m, v) in [(10, 60.0), (70, 80.0), (130, 100.0)] {
            ev(&mut s, m, "hr", v);
        }
        let row = extract_first_day_features(&s, &schema).unwrap();
        assert_eq!(row.len(), 72);
        assert_eq!(value(&schema, &row, "hr_min"), Some(60.0));
        assert_eq!(value(&schema, &row, "hr_mean"), Some(80.0));
        assert_eq!(value(&schema, &row, "hr_max"), Some(100.0));
        assert_eq!(value(&schema, &row, "glucose_max"), None);
        assert_eq!(value(&schema, &row, "glucose_min"), None);
        assert_eq!(value(&schema, &row, "age"), Some(55.0));
        assert_eq!(value(&schema, &row, "bmi"), None);
        assert_eq!(value(&schema, &row, "mech_vent"), Some(0.0));
        assert_eq!(value(&schema, &row, "urine_output"), None);
    }

    #[test]
    fn out_of_window_sentinels_are_ignored() {
        let schema = FeatureSchema::default_schema();
        let mut s = StayRecord::new("1", "p", t(0), 55.0);
        ev(&mut s, 0, "sodium", 140.0);
        ev(&mut s, 24 * 60 - 1, "sodium", 136.0);
        s.urine.push((t(60), 100.0));
        s.urine.push((t(120), 50.0));
        s.ventilation.push(t(300));
        let clean = extract_first_day_features(&s, &schema).unwrap();

        // sentinels just outside both ends of the window
        ev(&mut s, -1, "sodium", 1e6);
        ev(&mut s, 24 * 60, "sodium", -1e6);
        ev(&mut s, 24 * 60, "hr", 1e6);
        s.urine.push((t(-5), 1e6));
        s.urine.push((t(24 * 60), 1e6));
        s.sort_events();
        let with_sentinels = extract_first_day_features(&s, &schema).unwrap();
        assert_eq!(clean, with_sentinels);
        assert_eq!(value(&schema, &clean, "sodium_max"), Some(140.0));
        assert_eq!(value(&schema, &clean, "urine_output"), Some(150.0));
        assert_eq!(value(&schema, &clean, "mech_vent"), Some(1.0));

        let mut late = StayRecord::new("2", "p", t(0), 55.0);
        late.ventilation.push(t(24 * 60));
        let row = extract_first_day_features(&late, &schema).unwrap();
        assert_eq!(value(&schema, &row, "mech_vent"), Some(0.0));
    }
}
