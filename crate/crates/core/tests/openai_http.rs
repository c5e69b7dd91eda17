//! The HTTP backend against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use dialogsim::gateway::openai::OpenAiBackend;
use dialogsim::gateway::{BackendConfig, ChatMessage, ChatRequest, Gateway, GatewayError, RetryPolicy, TransportErrorKind};
use dialogsim::instrument::builtin_instrument;
use serde_json::Value;

struct Captured {
    headers: Vec<String>,
    body: Value,
}

/// Serves one canned `(status, body)` per connection, in order, and records
/// what each request carried.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                headers,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn ok(content: &str) -> (u16, String) {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 4}
    });
    (200, body.to_string())
}

fn gateway(endpoint: String, token: Option<&str>) -> Gateway {
    let config = BackendConfig {
        endpoint,
        model: "test-model".into(),
        auth_token: token.map(str::to_owned),
        timeout_secs: 10,
        ..BackendConfig::default()
    };
    Gateway::new(Arc::new(OpenAiBackend::new(&config)), RetryPolicy::immediate(3, 1), 4)
}

#[test]
fn structured_request_carries_schema_seed_and_token() {
    let (url, seen) = serve(vec![ok(
        r#"{"intention_white_meat": 5, "intention_red_meat": 6, "intention_processed_meat": 7}"#,
    )]);
    let schema = builtin_instrument().response_schema(&["intention"]).unwrap();
    let request = ChatRequest::new(vec![ChatMessage::user("answer")], 0.6)
        .with_seed(42)
        .with_schema(schema.clone());
    let out = gateway(url, Some("sekrit")).complete_structured(&request).unwrap();
    assert_eq!(out.answers["intention_red_meat"], 6);
    assert_eq!(out.usage.prompt_tokens, 11);

    let seen = seen.lock().unwrap();
    let req = &seen[0];
    assert!(req.headers.iter().any(|h| h == "Authorization: Bearer sekrit" || h == "authorization: Bearer sekrit"));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["seed"], 42);
    assert_eq!(req.body["temperature"], 0.6);
    assert_eq!(req.body["stream"], false);
    assert_eq!(req.body["response_format"], schema.to_response_format());
    assert_eq!(req.body, request.to_wire("test-model"));
}

#[test]
fn transient_status_is_retried() {
    let (url, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), ok("hello")]);
    let out = gateway(url, None).complete(&ChatRequest::new(vec![ChatMessage::user("hi")], 0.0)).unwrap();
    assert_eq!(out.completion.text, "hello");
    assert_eq!(out.failed_attempts.len(), 2);
    assert_eq!(out.failed_attempts[0].error.kind, TransportErrorKind::Status(503));
    let seen = seen.lock().unwrap();
    assert!(!seen[0].headers.iter().any(|h| h.to_ascii_lowercase().starts_with("authorization")));
}

#[test]
fn client_error_is_permanent() {
    let (url, seen) = serve(vec![(400, r#"{"error": "bad"}"#.into()), ok("never")]);
    let err = gateway(url, None)
        .complete(&ChatRequest::new(vec![ChatMessage::user("hi")], 0.0))
        .unwrap_err();
    match err {
        GatewayError::Transport { attempts } => {
            assert_eq!(attempts.len(), 1);
            assert_eq!(attempts[0].error.kind, TransportErrorKind::Status(400));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_permanent_and_empty_content_transient() {
    let (url, _) = serve(vec![(200, "not json".into())]);
    let err = gateway(url, None)
        .complete(&ChatRequest::new(vec![ChatMessage::user("hi")], 0.0))
        .unwrap_err();
    assert_eq!(err.attempts()[0].error.kind, TransportErrorKind::Malformed);

    let (url, seen) = serve(vec![ok(""), ok("second")]);
    let out = gateway(url, None).complete(&ChatRequest::new(vec![ChatMessage::user("hi")], 0.0)).unwrap();
    assert_eq!(out.completion.text, "second");
    assert_eq!(out.failed_attempts[0].error.kind, TransportErrorKind::EmptyCompletion);
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn refused_connection_exhausts_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = gateway(format!("http://127.0.0.1:{port}/v1"), None)
        .complete(&ChatRequest::new(vec![ChatMessage::user("hi")], 0.0))
        .unwrap_err();
    assert_eq!(err.attempts().len(), 4);
    assert!(err.attempts().iter().all(|a| a.error.is_transient()));
}
