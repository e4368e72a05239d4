//! The line-oriented term store shared by fixtures and the cache:
//! `term<TAB>status<TAB>value<TAB>timestamp`, where status is `resolved` or
//! `unresolved`. Compound terms map to a SMILES; NDC terms are written
//! `ndc:<code>` and map to a proprietary name. Later lines win, so the
//! file can be appended to safely.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;

use super::{CompoundLookup, NdcLookup, ResolveError, UpstreamError};

pub const NDC_PREFIX: &str = "ndc:";

pub fn ndc_key(ndc: &str) -> String {
    format!("{NDC_PREFIX}{}", ndc.trim())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreEntry {
    /// `None` records a definitive miss.
    pub value: Option<String>,
    pub timestamp: String,
}

fn parse_line(line: &str, lineno: usize, path: &Path) -> Result<Option<(String, StoreEntry)>, ResolveError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let bad = |m: &str| ResolveError::Store {
        path: path.to_path_buf(),
        message: format!("line {lineno}: {m}"),
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(bad("expected 4 tab-separated fields"));
    }
    let value = match fields[1] {
        "resolved" if !fields[2].is_empty() => Some(fields[2].to_string()),
        "resolved" => return Err(bad("resolved entry without a value")),
        "unresolved" => None,
        other => return Err(bad(&format!("unknown status {other:?}"))),
    };
    Ok(Some((
        fields[0].to_string(),
        StoreEntry {
            value,
            timestamp: fields[3].to_string(),
        },
    )))
}

pub fn read_store(path: &Path) -> Result<HashMap<String, StoreEntry>, ResolveError> {
    let f = std::fs::File::open(path).map_err(|e| ResolveError::Store {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ResolveError::Store {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some((k, v)) = parse_line(&line, i + 1, path)? {
            map.insert(k, v);
        }
    }
    Ok(map)
}

pub fn format_line(term: &str, entry: &StoreEntry) -> String {
    let (status, value) = match &entry.value {
        Some(v) => ("resolved", v.as_str()),
        None => ("unresolved", ""),
    };
    format!("{term}\t{status}\t{value}\t{}\n", entry.timestamp)
}

/// Read-only in-memory lookups loaded from a fixture file.
#[derive(Debug, Clone, Default)]
pub struct FixtureDb {
    entries: HashMap<String, StoreEntry>,
}

impl FixtureDb {
    pub fn load(path: &Path) -> Result<Self, ResolveError> {
        Ok(FixtureDb {
            entries: read_store(path)?,
        })
    }

    pub fn from_pairs<'a>(compounds: &[(&'a str, &'a str)], ndcs: &[(&'a str, &'a str)]) -> Self {
        let entry = |v: &str| StoreEntry {
            value: Some(v.to_string()),
            timestamp: String::new(),
        };
        let mut entries: HashMap<String, StoreEntry> =
            compounds.iter().map(|(k, v)| (k.to_string(), entry(v))).collect();
        entries.extend(ndcs.iter().map(|(k, v)| (ndc_key(k), entry(v))));
        FixtureDb { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompoundLookup for FixtureDb {
    fn smiles_for_name(&self, name: &str) -> Result<Option<String>, UpstreamError> {
        Ok(self.entries.get(name).and_then(|e| e.value.clone()))
    }
}

impl NdcLookup for FixtureDb {
    fn proprietary_name(&self, ndc: &str) -> Result<Option<String>, UpstreamError> {
        Ok(self.entries.get(&ndc_key(ndc)).and_then(|e| e.value.clone()))
    }
}

/// Persistent answers from earlier runs. New answers are buffered and
/// appended by `flush`.
#[derive(Debug, Default)]
pub struct ResolverCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, StoreEntry>>,
    pending: Mutex<Vec<(String, StoreEntry)>>,
}

impl ResolverCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a cache file, treating a missing file as empty.
    pub fn open(path: &Path) -> Result<Self, ResolveError> {
        let entries = if path.exists() { read_store(path)? } else { HashMap::new() };
        Ok(ResolverCache {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            pending: Mutex::new(Vec::new()),
        })
    }

    pub fn get(&self, term: &str) -> Option<Option<String>> {
        self.entries.lock().unwrap().get(term).map(|e| e.value.clone())
    }

    pub fn insert(&self, term: &str, value: Option<String>) {
        let entry = StoreEntry {
            value,
            timestamp: Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        };
        self.entries.lock().unwrap().insert(term.to_string(), entry.clone());
        self.pending.lock().unwrap().push((term.to_string(), entry));
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends buffered entries to the cache file, if there is one.
    pub fn flush(&self) -> Result<(), ResolveError> {
        let mut pending = self.pending.lock().unwrap();
        let Some(path) = &self.path else {
            pending.clear();
            return Ok(());
        };
        if pending.is_empty() {
            return Ok(());
        }
        let err = |e: std::io::Error| ResolveError::Store {
            path: path.clone(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        let text: String = pending.iter().map(|(k, v)| format_line(k, v)).collect();
        f.write_all(text.as_bytes()).map_err(err)?;
        pending.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_round_trip_and_later_lines_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let cache = ResolverCache::open(&path).unwrap();
        cache.insert("aspirin", Some("CC(=O)Oc1ccccc1C(=O)O".into()));
        cache.insert("ndc:00000000001", None);
        cache.flush().unwrap();
        cache.insert("aspirin", None);
        cache.flush().unwrap();
        let again = ResolverCache::open(&path).unwrap();
        assert_eq!(again.get("aspirin"), Some(None));
        assert_eq!(again.get("ndc:00000000001"), Some(None));
        assert_eq!(again.get("heparin"), None);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("aspirin\tresolved\tCC(=O)Oc1ccccc1C(=O)O\t"));
    }

    #[test]
    fn malformed_store_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "aspirin\tmaybe\tC\t\n").unwrap();
        assert!(matches!(FixtureDb::load(&path), Err(ResolveError::Store { .. })));
        std::fs::write(&path, "# comment\n\naspirin\tresolved\tC\n").unwrap();
        assert!(FixtureDb::load(&path).is_err());
    }
}
