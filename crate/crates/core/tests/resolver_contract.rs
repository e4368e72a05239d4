use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use nephrofp_core::resolver::http::{HttpClient, OpenFdaClient, PubChemClient, RetryPolicy};
use nephrofp_core::resolver::{
    resolve, resolve_batch, CompoundLookup, DrugRecord, FixtureDb, NdcLookup, Recording, ResolutionStatus,
    ResolverCache, UpstreamError,
};

const ASPIRIN: &str = "CC(=O)Oc1ccccc1C(=O)O";
const ACETAMINOPHEN: &str = "CC(=O)Nc1ccc(O)cc1";

/// Serves one scripted `(status, body)` per connection and records the
/// request paths.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            log.lock().unwrap().push(line.split_whitespace().nth(1).unwrap_or("").to_string());
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

fn client() -> HttpClient {
    let retry = RetryPolicy { attempts: 3, initial_backoff: Duration::from_millis(1) };
    HttpClient::new(1000.0, retry, Duration::from_secs(5))
}

fn pubchem_body(smiles: &str) -> String {
    format!(r#"{{"PropertyTable":{{"Properties":[{{"CID":1,"SMILES":"{smiles}"}}]}}}}"#)
}

#[test]
fn server_errors_are_retried_until_success() {
    let (base, seen) = serve(vec![(503, String::new()), (500, String::new()), (200, pubchem_body(ASPIRIN))]);
    let pubchem = PubChemClient::new(&base, client());
    assert_eq!(pubchem.smiles_for_name("aspirin").unwrap().as_deref(), Some(ASPIRIN));
    let paths = seen.lock().unwrap().clone();
    assert_eq!(paths.len(), 3);
    assert!(paths[0].starts_with("/compound/name/aspirin/property/"), "{}", paths[0]);
}

#[test]
fn not_found_is_a_single_request_miss() {
    let (base, seen) = serve(vec![(404, "{}".into())]);
    let pubchem = PubChemClient::new(&base, client());
    assert_eq!(pubchem.smiles_for_name("no such drug").unwrap(), None);
    assert_eq!(seen.lock().unwrap().as_slice(), ["/compound/name/no%20such%20drug/property/SMILES,IsomericSMILES,CanonicalSMILES/JSON"]);
}

#[test]
fn exhausted_retries_surface_the_last_status() {
    let (base, seen) = serve(vec![(502, String::new()), (502, String::new()), (503, String::new())]);
    let pubchem = PubChemClient::new(&base, client());
    assert_eq!(pubchem.smiles_for_name("aspirin"), Err(UpstreamError::Status(503)));
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, seen) = serve(vec![(400, String::new())]);
    let pubchem = PubChemClient::new(&base, client());
    assert_eq!(pubchem.smiles_for_name("aspirin"), Err(UpstreamError::Status(400)));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn openfda_queries_the_package_code() {
    let body = r#"{"results":[{"brand_name":"Tylenol","generic_name":"acetaminophen"}]}"#;
    let (base, seen) = serve(vec![(200, body.into())]);
    let fda = OpenFdaClient::new(&base, client());
    assert_eq!(fda.proprietary_name("50580045701").unwrap().as_deref(), Some("Tylenol"));
    let path = seen.lock().unwrap()[0].clone();
    assert!(path.starts_with("/drug/ndc.json?search=packaging%2Epackage%5Fndc%3A%2250580%2D457%2D01%22"), "{path}");
}

fn fixtures() -> FixtureDb {
    FixtureDb::from_pairs(
        &[("aspirin", ASPIRIN), ("tylenol", ACETAMINOPHEN), ("acetaminophen", ACETAMINOPHEN)],
        &[("50580045701", "TYLENOL")],
    )
}

#[test]
fn each_fallback_path_and_the_unresolved_terminal() {
    let db = fixtures();
    let cases = [
        (DrugRecord::new("Aspirin 81mg", Some("Aspirin"), None, "1"), ResolutionStatus::ResolvedByGeneric),
        (DrugRecord::new("Acetaminophen 325mg Tab", None, None, "1"), ResolutionStatus::ResolvedByName),
        (DrugRecord::new("Floor stock 7", None, Some("50580045701"), "1"), ResolutionStatus::ResolvedByNdc),
        (DrugRecord::new("Mystery elixir", Some("unobtainium"), Some("99999999999"), "1"), ResolutionStatus::Unresolved),
    ];
    for (record, status) in cases {
        let r = resolve(&record, &db, &db).unwrap();
        assert_eq!(r.status, status, "{record:?}");
        assert_eq!(r.smiles.is_some(), status != ResolutionStatus::Unresolved);
    }
}

#[test]
fn fallback_order_is_generic_then_name_then_ndc() {
    let rec = Recording::new(fixtures());
    let record = DrugRecord::new("Zzz 5 mg", Some("Yyy"), Some("50580045701"), "1");
    let r = resolve(&record, &rec, &rec).unwrap();
    assert_eq!(r.status, ResolutionStatus::ResolvedByNdc);
    assert_eq!(rec.calls(), ["yyy", "zzz", "ndc:50580045701", "tylenol"]);
}

#[test]
fn warm_cache_needs_no_upstream_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.tsv");
    let records = vec![
        DrugRecord::new("Aspirin", Some("aspirin"), None, "1"),
        DrugRecord::new("Aspirin", Some("aspirin"), None, "2"),
        DrugRecord::new("Floor stock", None, Some("50580045701"), "3"),
        DrugRecord::new("Unknown", None, None, "4"),
    ];
    let cold = Recording::new(fixtures());
    let first = resolve_batch(&records, &cold, &cold, &ResolverCache::open(&path).unwrap(), 2).unwrap();
    assert!(cold.call_count() > 0);
    // identical identities are looked up once
    assert_eq!(cold.calls().iter().filter(|c| *c == "aspirin").count(), 1);

    let warm = Recording::new(fixtures());
    let second = resolve_batch(&records, &warm, &warm, &ResolverCache::open(&path).unwrap(), 2).unwrap();
    assert_eq!(warm.call_count(), 0);
    assert_eq!(first, second);
}
