#![cfg(feature = "http")]

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use common::{golden_candidate, golden_problem};
use parallel_thinking::backends::http::{HttpBackend, HttpConfig};
use parallel_thinking::backends::{Backend, BackendError, CallRole, CallSite, RetryPolicy};
use parallel_thinking::domain::ParseStatus;

struct Stub {
    url: String,
    requests: Arc<Mutex<Vec<serde_json::Value>>>,
}

/// Serves the scripted (status, body) responses in order, one per connection.
fn stub(responses: Vec<(u16, String)>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap();
                    }
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            log.lock().unwrap().push(serde_json::from_slice(&payload).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    Stub { url, requests }
}

fn backend(url: &str) -> HttpBackend {
    HttpBackend::new(HttpConfig {
        url: url.to_owned(),
        model: "test-model".into(),
        api_key: Some("secret".into()),
        retry: RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(1),
        },
        timeout: Duration::from_secs(10),
    })
}

fn site(role: CallRole, verdict_index: Option<u32>) -> CallSite {
    CallSite {
        run_seed: 11,
        thread_index: 0,
        round_index: 1,
        role,
        verdict_index,
        max_tokens: 1000,
        temperature: 1.0,
    }
}

fn completion(content: &str, usage: Option<u64>, finish: &str) -> String {
    let mut body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}]
    });
    if let Some(tokens) = usage {
        body["usage"] = serde_json::json!({"completion_tokens": tokens});
    }
    body.to_string()
}

#[test]
fn generation_parses_code_and_usage() {
    let text = "Add them.\n\n```cpp\nint main(){}\n```";
    let server = stub(vec![(200, completion(text, Some(321), "stop"))]);
    let site = site(CallRole::Generation, None);
    let candidate = backend(&server.url).generate(&golden_problem(), &site).unwrap();
    assert_eq!(candidate.source_code, "int main(){}");
    assert_eq!(candidate.explanation, "Add them.");
    assert_eq!(candidate.token_count, 321);
    assert!(!candidate.truncated && !candidate.usage_estimated);
    let request = &server.requests.lock().unwrap()[0];
    assert_eq!(request["model"], "test-model");
    assert_eq!(request["max_tokens"], 1000);
    assert_eq!(request["seed"], site.seed());
    assert!(request["messages"][0]["content"].as_str().unwrap().contains("print a+b"));
}

#[test]
fn retries_server_errors_then_succeeds() {
    let server = stub(vec![
        (503, "{}".into()),
        (429, "{}".into()),
        (200, completion("Verdict: Correct.\nFine.", Some(7), "stop")),
    ]);
    let verdict = backend(&server.url)
        .verify(&golden_problem(), &golden_candidate(), &site(CallRole::Verification, Some(0)))
        .unwrap();
    assert!(verdict.judgment);
    assert_eq!(verdict.reasoning, "Fine.");
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn exhausted_retries_are_a_transport_error() {
    let server = stub(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
    let err = backend(&server.url)
        .generate(&golden_problem(), &site(CallRole::Generation, None))
        .unwrap_err();
    assert!(matches!(err, BackendError::Transport { attempts: 3, .. }));
}

#[test]
fn client_errors_are_fatal() {
    let server = stub(vec![(400, r#"{"error":"bad"}"#.into())]);
    let err = backend(&server.url)
        .generate(&golden_problem(), &site(CallRole::Generation, None))
        .unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn missing_usage_is_estimated_and_flagged() {
    let text = "Verdict: Incorrect.\nOverflow on large input.";
    let server = stub(vec![(200, completion(text, None, "stop"))]);
    let verdict = backend(&server.url)
        .verify(&golden_problem(), &golden_candidate(), &site(CallRole::Verification, Some(0)))
        .unwrap();
    assert!(!verdict.judgment);
    assert_eq!(verdict.parse_status, ParseStatus::Parsed);
    assert!(verdict.usage_estimated);
    assert_eq!(verdict.token_count, (text.chars().count() as u64).div_ceil(4));
}

#[test]
fn length_stop_marks_truncation() {
    let server = stub(vec![(200, completion("```cpp\nint main(){", Some(1000), "length"))]);
    let candidate = backend(&server.url)
        .generate(&golden_problem(), &site(CallRole::Generation, None))
        .unwrap();
    assert!(candidate.truncated);
}

#[test]
fn malformed_verdict_is_negative() {
    let server = stub(vec![(200, completion("I think it works.", Some(5), "stop"))]);
    let verdict = backend(&server.url)
        .verify(&golden_problem(), &golden_candidate(), &site(CallRole::Verification, Some(0)))
        .unwrap();
    assert_eq!(verdict.parse_status, ParseStatus::Malformed);
    assert!(!verdict.judgment);
}
