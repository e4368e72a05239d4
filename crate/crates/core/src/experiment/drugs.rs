use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, format_err, open, read_json, write_json, ExperimentError, FingerprintConfig, DRUGS_FILE, RESOLUTION_FILE};
use crate::cohort::{Cohort, FunnelStage};
use crate::fingerprint::{ecfp, Fingerprint};
use crate::molgraph::parse_smiles;
use crate::resolver::{resolve_batch, DrugRecord, Recording, ResolutionStatus, ResolverConfig};

pub const RESOLUTION_STAGE: &str = "with a resolved drug";

/// Per-stay fingerprint columns in cohort order.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugFeatures {
    pub width: usize,
    pub stay_ids: Vec<String>,
    pub n_drugs: Vec<usize>,
    pub n_resolved: Vec<usize>,
    pub rows: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSummary {
    pub fingerprint: FingerprintConfig,
    /// First-day prescription rows across retained stays.
    pub records: usize,
    pub by_status: BTreeMap<String, usize>,
    pub upstream_errors: usize,
    /// Lookups that reached the compound or NDC service.
    pub upstream_calls: usize,
    /// Stays kept with an all-zero fingerprint.
    pub stays_all_unresolved: usize,
    pub funnel_stage: FunnelStage,
}

impl DrugFeatures {
    /// Rows reordered to match `ids`.
    pub fn rows_for(&self, ids: &[String]) -> Result<Vec<Vec<u8>>, String> {
        let pos: HashMap<&str, usize> = self.stay_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        ids.iter()
            .map(|id| {
                pos.get(id.as_str())
                    .map(|&i| self.rows[i].clone())
                    .ok_or_else(|| format!("stay {id} has no drug features"))
            })
            .collect()
    }

    /// Sparse CSV: `stay_id,n_drugs,n_resolved,bits` with `bits` as
    /// space-separated `index:count` pairs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stay_id", "n_drugs", "n_resolved", "bits"])?;
        for i in 0..self.stay_ids.len() {
            let bits: Vec<String> = self.rows[i]
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(b, c)| format!("{b}:{c}"))
                .collect();
            w.write_record([
                self.stay_ids[i].clone(),
                self.n_drugs[i].to_string(),
                self.n_resolved[i].to_string(),
                bits.join(" "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R, width: usize) -> Result<Self, String> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut out = DrugFeatures {
            width,
            stay_ids: Vec::new(),
            n_drugs: Vec::new(),
            n_resolved: Vec::new(),
            rows: Vec::new(),
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let bad = |what: &str| format!("row {}: bad {what}", line + 2);
            if rec.len() != 4 {
                return Err(bad("field count"));
            }
            out.stay_ids.push(rec[0].to_string());
            out.n_drugs.push(rec[1].parse().map_err(|_| bad("n_drugs"))?);
            out.n_resolved.push(rec[2].parse().map_err(|_| bad("n_resolved"))?);
            let mut row = vec![0u8; width];
            for pair in rec[3].split_whitespace() {
                let (b, c) = pair.split_once(':').ok_or_else(|| bad("bits"))?;
                let b: usize = b.parse().map_err(|_| bad("bit index"))?;
                *row.get_mut(b).ok_or_else(|| bad("bit index"))? = c.parse().map_err(|_| bad("bit count"))?;
            }
            out.rows.push(row);
        }
        Ok(out)
    }
}

/// Resolves every first-day drug of the retained stays and folds the
/// resolved structures into per-stay fingerprint columns. Unresolved drugs
/// are left out; a stay with none resolved keeps all-zero columns.
pub fn resolve_drugs(
    cohort: &Cohort,
    resolver: &ResolverConfig,
    fp: &FingerprintConfig,
    out: &Path,
) -> Result<(DrugFeatures, ResolutionSummary), ExperimentError> {
    let lookups = resolver.lookups()?;
    let cache = resolver.cache()?;
    let compounds = Recording::new(lookups.compounds);
    let ndc = Recording::new(lookups.ndc);

    let records: Vec<DrugRecord> = cohort
        .stays
        .iter()
        .flat_map(|s| s.stay.first_day_prescriptions().map(|p| p.drug.clone()))
        .collect();
    let answers = resolve_batch(&records, &compounds, &ndc, &cache, resolver.parallelism)?;

    let mut by_status: BTreeMap<String, usize> = BTreeMap::new();
    let mut upstream_errors = 0;
    let mut fingerprints: HashMap<String, Fingerprint> = HashMap::new();
    let mut per_record = Vec::with_capacity(answers.len());
    for answer in &answers {
        let smiles = match answer {
            Ok(r) => {
                let key = serde_json::to_value(r.status).unwrap().as_str().unwrap().to_string();
                *by_status.entry(key).or_default() += 1;
                r.smiles.clone().filter(|_| r.status != ResolutionStatus::Unresolved)
            }
            Err(e) => {
                log::warn!("drug lookup failed: {e}");
                upstream_errors += 1;
                None
            }
        };
        if let Some(s) = &smiles {
            if !fingerprints.contains_key(s) {
                // resolve only accepts structures that parse
                let mol = parse_smiles(s).map_err(|e| ExperimentError::Data(format!("{s}: {e}")))?;
                let f = ecfp(&mol, fp.radius, fp.width).map_err(|e| ExperimentError::Data(e.to_string()))?;
                fingerprints.insert(s.clone(), f);
            }
        }
        per_record.push(smiles);
    }

    let mut features = DrugFeatures {
        width: fp.width,
        stay_ids: Vec::new(),
        n_drugs: Vec::new(),
        n_resolved: Vec::new(),
        rows: Vec::new(),
    };
    let mut next = per_record.iter();
    let mut kept = Vec::new();
    for s in &cohort.stays {
        let n = s.stay.first_day_prescriptions().count();
        let fps: Vec<Fingerprint> = next
            .by_ref()
            .take(n)
            .flatten()
            .map(|smiles| fingerprints[smiles].clone())
            .collect();
        let columns = fp
            .aggregation
            .columns(&fps, fp.width)
            .map_err(|e| ExperimentError::Data(e.to_string()))?;
        if !fps.is_empty() {
            kept.push(s);
        }
        features.stay_ids.push(s.stay.stay_id.clone());
        features.n_drugs.push(n);
        features.n_resolved.push(fps.len());
        features.rows.push(columns);
    }
    let stays_all_unresolved = cohort.stays.len() - kept.len();
    if stays_all_unresolved > 0 {
        log::info!("{stays_all_unresolved} stays have no resolved drug and keep an all-zero fingerprint");
    }
    let summary = ResolutionSummary {
        fingerprint: fp.clone(),
        records: records.len(),
        by_status,
        upstream_errors,
        upstream_calls: compounds.call_count() + ndc.call_count(),
        stays_all_unresolved,
        funnel_stage: FunnelStage::count(RESOLUTION_STAGE, &kept),
    };

    let path = out.join(DRUGS_FILE);
    features
        .write_csv(create(&path)?)
        .map_err(|e| format_err(&path)(e.to_string()))?;
    write_json(&out.join(RESOLUTION_FILE), &summary)?;
    Ok((features, summary))
}

pub fn read_drugs(out: &Path) -> Result<(DrugFeatures, ResolutionSummary), ExperimentError> {
    let summary: ResolutionSummary = read_json(&out.join(RESOLUTION_FILE))?;
    let path = out.join(DRUGS_FILE);
    let features = DrugFeatures::read_csv(open(&path)?, summary.fingerprint.width).map_err(format_err(&path))?;
    Ok((features, summary))
}
