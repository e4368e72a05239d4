use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::{Column, ColumnKind, ID_COLUMN, LABEL_COLUMN};

const DEFAULT_SCHEMA: &str = include_str!("../../data/default_schema.toml");

/// Vital-sign signals recorded in the chart-events table.
pub const VITAL_SIGNALS: [&str; 8] = ["hr", "sbp", "dbp", "mbp", "resp_rate", "temperature", "spo2", "gcs"];

pub fn is_vital(signal: &str) -> bool {
    VITAL_SIGNALS.contains(&signal)
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("column name {0:?} is reserved")]
    ReservedColumn(String),
    #[error("signal {signal:?}: aggregation {aggregation:?} is not valid for a {origin:?} source")]
    BadAggregation {
        signal: String,
        aggregation: Aggregation,
        origin: Source,
    },
    #[error("signal {0:?} declares no aggregations")]
    NoAggregations(String),
    #[error("schema parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Demographic,
    Event,
    Urine,
    Ventilation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Value,
    Max,
    Mean,
    Min,
    Sum,
    Any,
}

impl Aggregation {
    fn allowed(self, source: Source) -> bool {
        use Aggregation::*;
        match source {
            Source::Demographic => self == Value,
            Source::Event => matches!(self, Max | Mean | Min | Sum),
            Source::Urine => matches!(self, Max | Mean | Min | Sum),
            Source::Ventilation => self == Any,
        }
    }

    fn suffix(self) -> Option<&'static str> {
        match self {
            Aggregation::Max => Some("max"),
            Aggregation::Mean => Some("mean"),
            Aggregation::Min => Some("min"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub signal: String,
    pub source: Source,
    pub aggregations: Vec<Aggregation>,
    /// Defaults to binary for `any` and continuous otherwise.
    #[serde(default)]
    pub kind: Option<ColumnKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    #[serde(rename = "feature")]
    pub features: Vec<SignalSpec>,
}

/// One output column: which signal, how it is aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub column: Column,
    pub signal: String,
    pub source: Source,
    pub aggregation: Aggregation,
}

impl FeatureSchema {
    /// The shipped 72-column dictionary.
    pub fn default_schema() -> Self {
        Self::from_toml(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let schema: FeatureSchema = toml::from_str(text)?;
        schema.column_specs()?;
        Ok(schema)
    }

    pub fn column_specs(&self) -> Result<Vec<ColumnSpec>, SchemaError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for spec in &self.features {
            if spec.aggregations.is_empty() {
                return Err(SchemaError::NoAggregations(spec.signal.clone()));
            }
            for &agg in &spec.aggregations {
                if !agg.allowed(spec.source) {
                    return Err(SchemaError::BadAggregation {
                        signal: spec.signal.clone(),
                        aggregation: agg,
                        origin: spec.source,
                    });
                }
                let name = match agg.suffix() {
                    Some(s) => format!("{}_{s}", spec.signal),
                    None => spec.signal.clone(),
                };
                if name == ID_COLUMN || name == LABEL_COLUMN {
                    return Err(SchemaError::ReservedColumn(name));
                }
                if !seen.insert(name.clone()) {
                    return Err(SchemaError::DuplicateColumn(name));
                }
                let kind = spec.kind.unwrap_or(if agg == Aggregation::Any {
                    ColumnKind::Binary
                } else {
                    ColumnKind::Continuous
                });
                out.push(ColumnSpec {
                    column: Column::new(name, kind),
                    signal: spec.signal.clone(),
                    source: spec.source,
                    aggregation: agg,
                });
            }
        }
        Ok(out)
    }

    pub fn columns(&self) -> Result<Vec<Column>, SchemaError> {
        Ok(self.column_specs()?.into_iter().map(|c| c.column).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_72_columns() {
        let cols = FeatureSchema::default_schema().columns().unwrap();
        assert_eq!(cols.len(), 72);
        let names: Vec<_> = cols.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(&names[..7], ["age", "sex_male", "weight_kg", "height_cm", "bmi", "emergency", "hr_max"]);
        assert!(names.contains(&"creatinine_min"));
        assert_eq!(names[70..], ["urine_output", "mech_vent"]);
        let binary: Vec<_> = cols.iter().filter(|c| c.kind == ColumnKind::Binary).map(|c| c.name.as_str()).collect();
        assert_eq!(binary, ["sex_male", "emergency", "mech_vent"]);
    }

    #[test]
    fn duplicate_column_rejected() {
        let text = r#"
            [[feature]]
            signal = "hr"
            source = "event"
            aggregations = ["max"]
            [[feature]]
            signal = "hr"
            source = "event"
            aggregations = ["min", "max"]
        "#;
        assert!(matches!(
            FeatureSchema::from_toml(text),
            Err(SchemaError::DuplicateColumn(n)) if n == "hr_max"
        ));
    }

    #[test]
    fn aggregation_must_fit_source() {
        let text = r#"
            [[feature]]
            signal = "mech_vent"
            source = "ventilation"
            aggregations = ["mean"]
        "#;
        assert!(matches!(FeatureSchema::from_toml(text), Err(SchemaError::BadAggregation { .. })));
    }
}
