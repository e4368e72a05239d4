//! Prescription records to SMILES: generic name, then drug name, then NDC
//! via the registry's proprietary name, with a persistent term cache.

pub mod http;
mod normalize;
mod record;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::parse_smiles;

pub use normalize::normalize_name;
pub use record::DrugRecord;
pub use store::{ndc_key, FixtureDb, ResolverCache, NDC_PREFIX};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum UpstreamError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("upstream returned HTTP {0}")]
    Status(u16),
    #[error("malformed upstream response: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("{0:?} is empty after normalization")]
    EmptyAfterNormalization(String),
    #[error("{path}: {message}")]
    Store { path: PathBuf, message: String },
    #[error("invalid resolver config: {0}")]
    Config(String),
}

/// Name to SMILES.
pub trait CompoundLookup: Send + Sync {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError>;
}

/// NDC to proprietary drug name.
pub trait NdcLookup: Send + Sync {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError>;
}

impl<L: CompoundLookup + ?Sized> CompoundLookup for &L {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        (**self).smiles_for_name(name)
    }
}

impl<L: NdcLookup + ?Sized> NdcLookup for &L {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        (**self).proprietary_name(ndc)
    }
}

impl<L: CompoundLookup + ?Sized> CompoundLookup for Box<L> {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        (**self).smiles_for_name(name)
    }
}

impl<L: NdcLookup + ?Sized> NdcLookup for Box<L> {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        (**self).proprietary_name(ndc)
    }
}

/// Wraps lookups and records every term passed through, in order. Keys
/// from the NDC side carry the `ndc:` prefix.
#[derive(Debug, Default)]
pub struct Recording<L> {
    pub inner: L,
    calls: Mutex<Vec<String>>,
}

impl<L> Recording<L> {
    pub fn new(inner: L) -> Self {
        Recording {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl<L: CompoundLookup> CompoundLookup for Recording<L> {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        self.calls.lock().unwrap().push(name.to_string());
        self.inner.smiles_for_name(name)
    }
}

impl<L: NdcLookup> NdcLookup for Recording<L> {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        self.calls.lock().unwrap().push(ndc_key(ndc));
        self.inner.proprietary_name(ndc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionStatus {
    ResolvedByGeneric,
    ResolvedByName,
    ResolvedByNdc,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub status: ResolutionStatus,
    pub smiles: Option<String>,
    /// The last compound term sent upstream.
    pub queried_term: Option<String>,
}

impl Resolution {
    pub fn is_resolved(&self) -> bool {
        self.status != ResolutionStatus::Unresolved
    }
}

fn accept(smiles: String, term: &str) -> Option<String> {
    match parse_smiles(&smiles) {
        Ok(_) => {
            if smiles.contains('.') {
                log::warn!("{term:?} resolved to a multi-component SMILES; using it as returned");
            }
            Some(smiles)
        }
        Err(e) => {
            log::warn!("discarding unparseable SMILES for {term:?}: {e}");
            None
        }
    }
}

/// Tries generic name, drug name, then NDC. An upstream failure aborts this
/// record with an error instead of reporting it unresolved.
pub fn resolve(
    record: &DrugRecord,
    compounds: &dyn CompoundLookup,
    ndc_db: &dyn NdcLookup,
) -> Result<Resolution, UpstreamError> {
    let mut queried: Vec<String> = Vec::new();
    let mut try_term = |raw: &str, status: ResolutionStatus| -> Result<Option<Resolution>, UpstreamError> {
        let Ok(term) = normalize_name(raw) else {
            return Ok(None);
        };
        if queried.contains(&term) {
            return Ok(None);
        }
        queried.push(term.clone());
        Ok(compounds
            .smiles_for_name(&term)?
            .and_then(|s| accept(s, &term))
            .map(|smiles| Resolution {
                status,
                smiles: Some(smiles),
                queried_term: Some(term),
            }))
    };

    if let Some(g) = &record.generic_name {
        if let Some(r) = try_term(g, ResolutionStatus::ResolvedByGeneric)? {
            return Ok(r);
        }
    }
    if !record.drug_name.is_empty() {
        if let Some(r) = try_term(&record.drug_name, ResolutionStatus::ResolvedByName)? {
            return Ok(r);
        }
    }
    if let Some(ndc) = &record.ndc {
        if let Some(name) = ndc_db.proprietary_name(ndc)? {
            if let Some(r) = try_term(&name, ResolutionStatus::ResolvedByNdc)? {
                return Ok(r);
            }
        }
    }
    Ok(Resolution {
        status: ResolutionStatus::Unresolved,
        smiles: None,
        queried_term: queried.pop(),
    })
}

/// Cache in front of both lookups. Concurrent requests for one term share
/// a single upstream call.
struct Cached<'a> {
    compounds: &'a dyn CompoundLookup,
    ndc_db: &'a dyn NdcLookup,
    cache: &'a ResolverCache,
    in_flight: Mutex<HashMap<String, Arc<OnceLock<Result<Option<String>, UpstreamError>>>>>,
}

impl Cached<'_> {
    fn fetch(
        &self,
        key: &str,
        upstream: impl FnOnce() -> Result<Option<String>, UpstreamError>,
    ) -> Result<Option<String>, UpstreamError> {
        if let Some(hit) = self.cache.get(key) {
            return Ok(hit);
        }
        let cell = self.in_flight.lock().unwrap().entry(key.to_string()).or_default().clone();
        cell.get_or_init(|| {
            let answer = upstream();
            if let Ok(v) = &answer {
                self.cache.insert(key, v.clone());
            }
            answer
        })
        .clone()
    }
}

impl CompoundLookup for Cached<'_> {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        self.fetch(name, || self.compounds.smiles_for_name(name))
    }
}

impl NdcLookup for Cached<'_> {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        self.fetch(&ndc_key(ndc), || self.ndc_db.proprietary_name(ndc))
    }
}

/// Identity used to deduplicate records before any lookup.
fn identity(r: &DrugRecord) -> (Option<String>, Option<String>, Option<String>) {
    (
        r.generic_name.as_deref().and_then(|g| normalize_name(g).ok()),
        normalize_name(&r.drug_name).ok(),
        r.ndc.clone(),
    )
}

/// Resolves records in input order. Identical identities are resolved
/// once, cached terms are never sent upstream, and new answers are appended
/// to the cache file when the batch ends.
pub fn resolve_batch(
    records: &[DrugRecord],
    compounds: &dyn CompoundLookup,
    ndc_db: &dyn NdcLookup,
    cache: &ResolverCache,
    parallelism: usize,
) -> Result<Vec<Result<Resolution, UpstreamError>>, ResolveError> {
    let mut unique: Vec<&DrugRecord> = Vec::new();
    let mut slot: HashMap<_, usize> = HashMap::new();
    let index: Vec<usize> = records
        .iter()
        .map(|r| {
            *slot.entry(identity(r)).or_insert_with(|| {
                unique.push(r);
                unique.len() - 1
            })
        })
        .collect();

    let cached = Cached {
        compounds,
        ndc_db,
        cache,
        in_flight: Mutex::new(HashMap::new()),
    };
    let run = || -> Vec<Result<Resolution, UpstreamError>> {
        unique.par_iter().map(|r| resolve(r, &cached, &cached)).collect()
    };
    let answers = if parallelism <= 1 {
        unique.iter().map(|r| resolve(r, &cached, &cached)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| ResolveError::Config(e.to_string()))?
            .install(run)
    };
    cache.flush()?;
    Ok(index.into_iter().map(|i| answers[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolverConfig {
    /// Offline mode: answer every lookup from this fixture file.
    pub fixtures: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub pubchem_base_url: String,
    pub openfda_base_url: String,
    pub rate_limit_per_sec: f64,
    pub parallelism: usize,
    pub retry_attempts: u32,
    pub retry_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            fixtures: None,
            cache_path: None,
            pubchem_base_url: "https://pubchem.ncbi.nlm.nih.gov/rest/pug".into(),
            openfda_base_url: "https://api.fda.gov".into(),
            rate_limit_per_sec: 5.0,
            parallelism: 4,
            retry_attempts: 3,
            retry_backoff_ms: 500,
            timeout_secs: 30,
        }
    }
}

/// Lookups chosen by config: fixtures when given, otherwise HTTP.
pub struct Lookups {
    pub compounds: Box<dyn CompoundLookup>,
    pub ndc: Box<dyn NdcLookup>,
}

impl ResolverConfig {
    pub fn validate(&self) -> Result<(), ResolveError> {
        if !(self.rate_limit_per_sec > 0.0) {
            return Err(ResolveError::Config("rate_limit_per_sec must be > 0".into()));
        }
        if self.parallelism < 1 || self.retry_attempts < 1 {
            return Err(ResolveError::Config("parallelism and retry_attempts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lookups(&self) -> Result<Lookups, ResolveError> {
        self.validate()?;
        if let Some(path) = &self.fixtures {
            let db = FixtureDb::load(path)?;
            return Ok(Lookups {
                compounds: Box::new(db.clone()),
                ndc: Box::new(db),
            });
        }
        // one limiter per service
        let client = || {
            http::HttpClient::new(
                self.rate_limit_per_sec,
                http::RetryPolicy {
                    attempts: self.retry_attempts,
                    initial_backoff: Duration::from_millis(self.retry_backoff_ms),
                },
                Duration::from_secs(self.timeout_secs),
            )
        };
        Ok(Lookups {
            compounds: Box::new(http::PubChemClient::new(&self.pubchem_base_url, client())),
            ndc: Box::new(http::OpenFdaClient::new(&self.openfda_base_url, client())),
        })
    }

    pub fn cache(&self) -> Result<ResolverCache, ResolveError> {
        match &self.cache_path {
            Some(p) => ResolverCache::open(p),
            None => Ok(ResolverCache::in_memory()),
        }
    }
}
