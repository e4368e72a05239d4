//! HTTP adapters for the public compound database (PubChem PUG REST) and
//! the NDC registry (openFDA).

use std::sync::Mutex;
use std::thread::sleep;
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde_json::Value;

use super::{CompoundLookup, NdcLookup, UpstreamError};

/// Spaces requests at least `1 / rate` seconds apart across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        RateLimiter {
            interval: if rate > 0.0 { Duration::from_secs_f64(1.0 / rate) } else { Duration::ZERO },
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Shared transport: agent, limiter and retry loop.
#[derive(Debug)]
pub struct HttpClient {
    agent: ureq::Agent,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

enum Outcome {
    Found(String),
    Missing,
}

impl HttpClient {
    pub fn new(rate_per_sec: f64, retry: RetryPolicy, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(concat!("nephrofp/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        HttpClient {
            agent,
            limiter: RateLimiter::per_second(rate_per_sec),
            retry,
        }
    }

    /// GET with retries on transport errors, 429 and 5xx. A 404 is a miss.
    fn get(&self, url: &str) -> Result<Outcome, UpstreamError> {
        let mut backoff = self.retry.initial_backoff;
        let mut last = None;
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                sleep(backoff);
                backoff *= 2;
            }
            self.limiter.acquire();
            log::debug!("GET {url}");
            match self.agent.get(url).call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    match status {
                        200..=299 => {
                            return resp
                                .body_mut()
                                .read_to_string()
                                .map(Outcome::Found)
                                .map_err(|e| UpstreamError::Transport(e.to_string()));
                        }
                        404 => return Ok(Outcome::Missing),
                        429 | 500..=599 => last = Some(UpstreamError::Status(status)),
                        _ => return Err(UpstreamError::Status(status)),
                    }
                }
                Err(e) => last = Some(UpstreamError::Transport(e.to_string())),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

fn encode(segment: &str) -> String {
    utf8_percent_encode(segment, NON_ALPHANUMERIC).to_string()
}

/// Name to SMILES through PubChem PUG REST.
#[derive(Debug)]
pub struct PubChemClient {
    base_url: String,
    http: HttpClient,
}

impl PubChemClient {
    pub fn new(base_url: &str, http: HttpClient) -> Self {
        PubChemClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            http,
        }
    }
}

/// Property names have changed over time; take the first present.
const SMILES_KEYS: [&str; 4] = ["SMILES", "IsomericSMILES", "CanonicalSMILES", "ConnectivitySMILES"];

pub fn parse_pubchem(body: &str) -> Result<Option<String>, UpstreamError> {
    let v: Value = serde_json::from_str(body).map_err(|e| UpstreamError::Malformed(e.to_string()))?;
    let Some(first) = v.pointer("/PropertyTable/Properties/0") else {
        return Ok(None);
    };
    let hits = v.pointer("/PropertyTable/Properties").and_then(Value::as_array).map_or(1, Vec::len);
    if hits > 1 {
        // combination products match several compounds; keep the first
        log::warn!("{hits} compound hits, using CID {}", first.get("CID").unwrap_or(&Value::Null));
    }
    Ok(SMILES_KEYS
        .iter()
        .find_map(|k| first.get(*k).and_then(Value::as_str))
        .map(str::to_string))
}

impl CompoundLookup for PubChemClient {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        let url = format!(
            "{}/compound/name/{}/property/SMILES,IsomericSMILES,CanonicalSMILES/JSON",
            self.base_url,
            encode(name)
        );
        match self.http.get(&url)? {
            Outcome::Found(body) => parse_pubchem(&body),
            Outcome::Missing => Ok(None),
        }
    }
}

/// NDC to proprietary name through the openFDA NDC directory.
#[derive(Debug)]
pub struct OpenFdaClient {
    base_url: String,
    http: HttpClient,
}

impl OpenFdaClient {
    pub fn new(base_url: &str, http: HttpClient) -> Self {
        OpenFdaClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            http,
        }
    }
}

/// Hyphenated 10-digit package codes an 11-digit NDC may come from
/// (4-4-2, 5-3-2 and 5-4-1 labeler-product-package splits).
pub fn ndc_package_candidates(ndc: &str) -> Vec<String> {
    let ndc = ndc.trim();
    if ndc.contains('-') {
        return vec![ndc.to_string()];
    }
    if ndc.len() != 11 || !ndc.bytes().all(|b| b.is_ascii_digit()) {
        return vec![ndc.to_string()];
    }
    let (lab, prod, pkg) = (&ndc[..5], &ndc[5..9], &ndc[9..]);
    let mut out = Vec::new();
    if let Some(l) = lab.strip_prefix('0') {
        out.push(format!("{l}-{prod}-{pkg}"));
    }
    if let Some(p) = prod.strip_prefix('0') {
        out.push(format!("{lab}-{p}-{pkg}"));
    }
    if let Some(k) = pkg.strip_prefix('0') {
        out.push(format!("{lab}-{prod}-{k}"));
    }
    out
}

pub fn parse_openfda(body: &str) -> Result<Option<String>, UpstreamError> {
    let v: Value = serde_json::from_str(body).map_err(|e| UpstreamError::Malformed(e.to_string()))?;
    Ok(v.pointer("/results/0/brand_name")
        .or_else(|| v.pointer("/results/0/generic_name"))
        .and_then(Value::as_str)
        .map(str::to_string))
}

impl NdcLookup for OpenFdaClient {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        for candidate in ndc_package_candidates(ndc) {
            let query = encode(&format!("packaging.package_ndc:\"{candidate}\""));
            let url = format!("{}/drug/ndc.json?search={query}&limit=1", self.base_url);
            if let Outcome::Found(body) = self.http.get(&url)? {
                if let Some(name) = parse_openfda(&body)? {
                    return Ok(Some(name));
                }
            }
        }
        Ok(None)
    }
}
