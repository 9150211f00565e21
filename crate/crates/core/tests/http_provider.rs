//! HTTP transport against a tiny in-test server speaking the wire protocol.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use halludetect::providers::{
    Embedder, FixtureEmbedder, FixtureTransport, GenerationRequest, Generator, HttpTransport,
    NliClassifier, NliLabel, RemoteProvider, Transport,
};
use halludetect::Error;

#[derive(Clone, Copy)]
enum Mode {
    Serve,
    /// 503 for the first `n` requests, then serve.
    FailFirst(usize),
    Status(u16),
    Garbage,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Vec<u8>)> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let path = line.split_whitespace().nth(1)?.to_string();
    let mut length = 0;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        if header == "\r\n" || header.is_empty() {
            break;
        }
        if let Some((k, v)) = header.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some((path, body))
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let reply = format!(
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(reply.as_bytes());
}

/// Starts a server; returns its base URL and a request counter.
fn serve(mode: Mode) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        let backend = FixtureTransport::default();
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some((path, body)) = read_request(&mut stream) else { continue };
            let seen = counter.fetch_add(1, Ordering::SeqCst);
            match mode {
                Mode::FailFirst(n) if seen < n => respond(&mut stream, 503, "{}"),
                Mode::Status(code) => respond(&mut stream, code, "{}"),
                Mode::Garbage => respond(&mut stream, 200, "not json"),
                _ => {
                    let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    match backend.call(&path, &request) {
                        Ok(v) => respond(&mut stream, 200, &v.to_string()),
                        Err(e) => respond(&mut stream, 400, &serde_json::json!({"error": e.to_string()}).to_string()),
                    }
                }
            }
        }
    });
    (url, hits)
}

fn client(url: &str) -> RemoteProvider<HttpTransport> {
    RemoteProvider::new(
        HttpTransport::new(url, Duration::from_secs(5))
            .unwrap()
            .with_retry(3, Duration::from_millis(10)),
    )
}

#[test]
fn http_backends_match_fixtures() {
    let (url, _) = serve(Mode::Serve);
    let remote = client(&url);
    let local = FixtureEmbedder::default();
    let texts = ["TiO2 is stable.", "Copper conducts heat."];
    // the client renormalizes what it receives, so allow last-bit differences
    for (r, l) in remote.embed(&texts).unwrap().iter().zip(local.embed(&texts).unwrap()) {
        assert!(r.values().iter().zip(l.values()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    let v = remote.nli("TiO2 is stable", "TiO2 is not stable").unwrap();
    assert_eq!(v.label, NliLabel::Contradiction);
    let req = GenerationRequest {
        prompt: "What is rutile?".into(),
        temperature: 0.7,
        sample_count: 3,
        seed: 1,
    };
    assert_eq!(remote.generate(&req).unwrap(), halludetect::providers::FixtureGenerator.generate(&req).unwrap());
}

#[test]
fn server_errors_are_retried() {
    let (url, hits) = serve(Mode::FailFirst(2));
    let remote = client(&url);
    assert!(remote.embed(&["retry me"]).is_ok());
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_give_up_after_three_attempts() {
    let (url, hits) = serve(Mode::FailFirst(usize::MAX));
    let err = client(&url).embed(&["x"]).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_and_garbage_are_not_retried() {
    let (url, hits) = serve(Mode::Status(422));
    assert!(matches!(client(&url).embed(&["x"]), Err(Error::Protocol(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    let (url, hits) = serve(Mode::Garbage);
    assert!(matches!(client(&url).embed(&["x"]), Err(Error::Protocol(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}")).embed(&["x"]).unwrap_err();
    assert!(err.is_retryable(), "{err}");
}
