//! The HTTP provider against an in-process server speaking the wire protocol.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use styleprobe::corpus::{Document, Episode};
use styleprobe::embedding::{
    embed_episodes, write_store_jsonl, write_store_spev, EmbedRequest, EmbedResponse,
    EmbeddingProvider, FileProvider, ProviderKind, ProviderSpec, RemoteProvider, StoreRecord,
};
use styleprobe::Error;

enum Behavior {
    /// Answer from a table keyed by the episode's texts joined with newlines.
    Table(HashMap<String, Vec<f64>>),
    Fail(u16, String),
    Garbage,
}

struct Server {
    url: String,
    requests: Arc<Mutex<Vec<EmbedRequest>>>,
    hits: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Vec<u8>)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).ok()? == 0 {
        return None;
    }
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some((request_line, body))
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = if status == 200 { "OK" } else { "Error" };
    let msg = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(msg.as_bytes());
    let _ = stream.flush();
}

fn serve(behavior: Behavior) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let hits = Arc::new(AtomicUsize::new(0));
    let (req_log, hit_count) = (requests.clone(), hits.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some((line, body)) = read_request(&mut stream) else {
                continue;
            };
            hit_count.fetch_add(1, Ordering::SeqCst);
            if !line.starts_with("POST /embed ") {
                respond(&mut stream, 404, r#"{"error":"no such route"}"#);
                continue;
            }
            let req: EmbedRequest = match serde_json::from_slice(&body) {
                Ok(r) => r,
                Err(e) => {
                    respond(
                        &mut stream,
                        400,
                        &serde_json::json!({ "error": e.to_string() }).to_string(),
                    );
                    continue;
                }
            };
            req_log.lock().unwrap().push(req.clone());
            match &behavior {
                Behavior::Table(table) => {
                    let vectors: Option<Vec<Vec<f64>>> = req
                        .texts
                        .iter()
                        .map(|t| table.get(&t.join("\n")).cloned())
                        .collect();
                    match vectors {
                        Some(vectors) => respond(
                            &mut stream,
                            200,
                            &serde_json::to_string(&EmbedResponse { vectors }).unwrap(),
                        ),
                        None => respond(&mut stream, 500, r#"{"error":"unknown text"}"#),
                    }
                }
                Behavior::Fail(status, msg) => respond(
                    &mut stream,
                    *status,
                    &serde_json::json!({ "error": msg }).to_string(),
                ),
                Behavior::Garbage => respond(&mut stream, 200, "not json"),
            }
        }
    });
    Server {
        url,
        requests,
        hits,
    }
}

fn episode(i: usize) -> Episode {
    Episode {
        episode_id: format!("e{i}"),
        author_id: format!("a{i}"),
        documents: vec![
            Document::new(
                format!("d{i}-0"),
                format!("a{i}"),
                format!("first text of {i}"),
            ),
            Document::new(
                format!("d{i}-1"),
                format!("a{i}"),
                format!("second text of {i}"),
            ),
        ],
    }
}

/// Deterministic, deliberately non-unit vectors so normalization is exercised.
fn raw_vector(i: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| ((i * 7 + j * 3) % 11) as f64 - 4.5)
        .collect()
}

fn table(n: usize, dim: usize) -> HashMap<String, Vec<f64>> {
    (0..n)
        .map(|i| (episode(i).texts().join("\n"), raw_vector(i, dim)))
        .collect()
}

#[test]
fn batches_preserve_order_and_normalize() {
    let server = serve(Behavior::Table(table(5, 6)));
    let provider = RemoteProvider::new(&server.url, 6, 2);
    let eps: Vec<Episode> = (0..5).rev().map(episode).collect();
    let refs: Vec<&Episode> = eps.iter().collect();
    let vectors = embed_episodes(&provider, &refs).unwrap();
    assert_eq!(vectors.len(), 5);
    for (v, ep) in vectors.iter().zip(&eps) {
        let i: usize = ep.episode_id[1..].parse().unwrap();
        let raw = raw_vector(i, 6);
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        for (a, b) in v.as_slice().iter().zip(&raw) {
            assert!((a - b / norm).abs() < 1e-12);
        }
    }
    let requests = server.requests.lock().unwrap();
    let sizes: Vec<usize> = requests.iter().map(|r| r.texts.len()).collect();
    assert_eq!(sizes, vec![2, 2, 1]);
    assert_eq!(
        requests[0].texts[0],
        vec!["first text of 4", "second text of 4"]
    );
}

#[test]
fn matches_file_store_with_same_content() {
    let dim = 8;
    let n = 4;
    let server = serve(Behavior::Table(table(n, dim)));
    let dir = tempfile::tempdir().unwrap();
    // values representable in f32, so the binary store is exact too
    let records: Vec<StoreRecord> = (0..n)
        .map(|i| StoreRecord {
            episode_id: format!("e{i}"),
            vector: raw_vector(i, dim),
        })
        .collect();
    let jsonl = dir.path().join("store.jsonl");
    let spev = dir.path().join("store.spev");
    write_store_jsonl(&jsonl, &records).unwrap();
    write_store_spev(&spev, &records).unwrap();

    let eps: Vec<Episode> = (0..n).map(episode).collect();
    let refs: Vec<&Episode> = eps.iter().collect();
    let remote = embed_episodes(&RemoteProvider::new(&server.url, dim, 3), &refs).unwrap();
    let from_jsonl = embed_episodes(&FileProvider::open(&jsonl, dim).unwrap(), &refs).unwrap();
    let from_spev = embed_episodes(&FileProvider::open(&spev, dim).unwrap(), &refs).unwrap();
    for ((r, j), s) in remote.iter().zip(&from_jsonl).zip(&from_spev) {
        let bits = |v: &styleprobe::embedding::EmbeddingVector| {
            v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(r), bits(j));
        assert_eq!(bits(r), bits(s));
    }
}

#[test]
fn error_status_carries_message() {
    let server = serve(Behavior::Fail(500, "model exploded".into()));
    let provider = RemoteProvider::new(&server.url, 4, 8);
    let ep = episode(0);
    let err = embed_episodes(&provider, &[&ep]).unwrap_err();
    assert!(matches!(err, Error::Provider(_)), "{err:?}");
    assert!(err.to_string().contains("model exploded"), "{err}");
    assert!(err.to_string().contains("500"), "{err}");
    assert!(err.is_provider_failure());
}

#[test]
fn malformed_body_is_provider_error() {
    let server = serve(Behavior::Garbage);
    let provider = RemoteProvider::new(&server.url, 4, 8);
    let ep = episode(0);
    let err = embed_episodes(&provider, &[&ep]).unwrap_err();
    assert!(matches!(err, Error::Provider(_)), "{err:?}");
}

#[test]
fn wrong_dimension_rejected() {
    let server = serve(Behavior::Table(table(1, 3)));
    let provider = RemoteProvider::new(&server.url, 4, 8);
    let ep = episode(0);
    let err = embed_episodes(&provider, &[&ep]).unwrap_err();
    assert!(
        matches!(
            err,
            Error::DimensionMismatch {
                expected: 4,
                actual: 3
            }
        ),
        "{err:?}"
    );
    assert!(err.is_provider_failure());
}

#[test]
fn unreachable_host_is_transport_error() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let provider = RemoteProvider::new(&format!("http://127.0.0.1:{port}"), 4, 8);
    let ep = episode(0);
    let err = provider.embed_raw(&[&ep]).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err:?}");
    assert!(err.is_provider_failure());
}

#[test]
fn spec_builds_remote_provider() {
    let server = serve(Behavior::Table(table(2, 5)));
    let spec = ProviderSpec::remote(format!("{}/", server.url), 5);
    assert_eq!(spec.kind, ProviderKind::Remote);
    let provider = spec.build().unwrap();
    let eps: Vec<Episode> = (0..2).map(episode).collect();
    let refs: Vec<&Episode> = eps.iter().collect();
    let a = embed_episodes(provider.as_ref(), &refs).unwrap();
    let b = embed_episodes(provider.as_ref(), &refs).unwrap();
    assert_eq!(a, b);
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
}
