use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use puzzle2asp::llm::{ApiStyle, CompletionBackend, CompletionRequest, LiveBackend, LiveConfig, LlmError};
use serde_json::{json, Value};

struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

struct Mock {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
    handle: JoinHandle<()>,
}

/// Serves the canned `(status, extra headers, body)` replies in order, one
/// per connection.
fn mock(replies: Vec<(u16, &'static str, String)>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = std::thread::spawn(move || {
        for (status, headers, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path,
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n{headers}\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    Mock { url, seen, handle }
}

fn chat_ok(text: &str) -> (u16, &'static str, String) {
    (200, "", json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string())
}

fn backend(url: &str, style: ApiStyle) -> LiveBackend {
    LiveBackend::new(LiveConfig {
        base_url: url.to_string(),
        api_key: Some("sk-test".into()),
        style,
        initial_backoff: Duration::from_millis(1),
        ..LiveConfig::default()
    })
    .unwrap()
}

fn req() -> CompletionRequest {
    CompletionRequest::new("Problem 3:\nstory", "gpt-4")
}

#[test]
fn chat_round_trip() {
    let m = mock(vec![chat_ok("price: 1; 2.")]);
    let b = backend(&m.url, ApiStyle::Chat);
    assert_eq!(b.complete(&req()).unwrap(), "price: 1; 2.");
    m.handle.join().unwrap();
    let seen = m.seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["messages"][0]["content"], "Problem 3:\nstory");
    assert_eq!(seen[0].body["messages"][0]["role"], "user");
    assert_eq!(seen[0].body["temperature"], 0.0);
    assert_eq!(seen[0].body["top_p"], 1.0);
    assert_eq!(seen[0].body["max_tokens"], 2048);
}

#[test]
fn legacy_completions() {
    let m = mock(vec![(200, "", json!({"choices": [{"text": "ok"}]}).to_string())]);
    let b = backend(&m.url, ApiStyle::Completions);
    let mut r = req();
    r.stop = Some(vec!["\n\n\n".into()]);
    assert_eq!(b.complete(&r).unwrap(), "ok");
    m.handle.join().unwrap();
    let seen = m.seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/completions");
    assert_eq!(seen[0].body["prompt"], "Problem 3:\nstory");
    assert_eq!(seen[0].body["stop"][0], "\n\n\n");
}

#[test]
fn rate_limit_is_retried() {
    let m = mock(vec![(429, "Retry-After: 0\r\n", "{}".into()), chat_ok("done")]);
    let b = backend(&m.url, ApiStyle::Chat);
    assert_eq!(b.complete(&req()).unwrap(), "done");
    m.handle.join().unwrap();
    assert_eq!(m.seen.lock().unwrap().len(), 2);
}

#[test]
fn server_errors_are_retried() {
    let m = mock(vec![(500, "", "{}".into()), (503, "", "{}".into()), chat_ok("done")]);
    let b = backend(&m.url, ApiStyle::Chat);
    assert_eq!(b.complete(&req()).unwrap(), "done");
    m.handle.join().unwrap();
    assert_eq!(m.seen.lock().unwrap().len(), 3);
}

#[test]
fn retries_stop_after_three() {
    let m = mock((0..4).map(|_| (503, "", "busy".to_string())).collect());
    let b = backend(&m.url, ApiStyle::Chat);
    assert_eq!(
        b.complete(&req()),
        Err(LlmError::Http {
            status: 503,
            body: "busy".into()
        })
    );
    m.handle.join().unwrap();
    assert_eq!(m.seen.lock().unwrap().len(), 4);
}

#[test]
fn persistent_rate_limit_surfaces() {
    let m = mock((0..4).map(|_| (429, "Retry-After: 0\r\n", "{}".to_string())).collect());
    let b = backend(&m.url, ApiStyle::Chat);
    assert!(matches!(b.complete(&req()), Err(LlmError::RateLimited { .. })));
    m.handle.join().unwrap();
}

#[test]
fn client_errors_are_not_retried() {
    let m = mock(vec![(400, "", "{\"error\":\"bad\"}".into())]);
    let b = backend(&m.url, ApiStyle::Chat);
    assert!(matches!(b.complete(&req()), Err(LlmError::Http { status: 400, .. })));
    m.handle.join().unwrap();
    assert_eq!(m.seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_payload_is_a_transport_error() {
    let m = mock(vec![(200, "", "{\"choices\": []}".into())]);
    let b = backend(&m.url, ApiStyle::Chat);
    assert!(matches!(b.complete(&req()), Err(LlmError::Transport(_))));
    m.handle.join().unwrap();
}

#[test]
fn unreachable_endpoint() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(&format!("http://127.0.0.1:{port}/v1"), ApiStyle::Chat);
    assert!(matches!(b.complete(&req()), Err(LlmError::Transport(_))));
}

#[test]
fn concurrent_calls_share_the_backend() {
    let m = mock((0..6).map(|i| chat_ok(&format!("r{i}"))).collect());
    let b = Arc::new(LiveBackend::new(LiveConfig {
        base_url: m.url.clone(),
        max_in_flight: 2,
        initial_backoff: Duration::from_millis(1),
        ..LiveConfig::default()
    })
    .unwrap());
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let b = b.clone();
            std::thread::spawn(move || b.complete(&req()).unwrap())
        })
        .collect();
    let mut got: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    got.sort();
    assert_eq!(got, ["r0", "r1", "r2", "r3", "r4", "r5"]);
    m.handle.join().unwrap();
}
