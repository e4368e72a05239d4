use serde::{Deserialize, Serialize};

/// One prescription's identity fields as written in the source table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DrugRecord {
    pub drug_name: String,
    pub generic_name: Option<String>,
    pub ndc: Option<String>,
    pub source_stay_id: String,
}

impl DrugRecord {
    pub fn new(
        drug_name: impl Into<String>,
        generic_name: Option<&str>,
        ndc: Option<&str>,
        source_stay_id: impl Into<String>,
    ) -> Self {
        let clean = |s: Option<&str>| s.map(str::trim).filter(|s| !s.is_empty()).map(String::from);
        DrugRecord {
            drug_name: drug_name.into().trim().to_string(),
            generic_name: clean(generic_name),
            ndc: clean(ndc),
            source_stay_id: source_stay_id.into(),
        }
    }

    /// At least one of name, generic name and NDC is present.
    pub fn has_identity(&self) -> bool {
        !self.drug_name.is_empty() || self.generic_name.is_some() || self.ndc.is_some()
    }
}
