mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{chat_body, Server};
use linked::cache::ResponseCache;
use linked::gateway::{ChatBackend, Gateway, HttpBackend, RetryPolicy};
use linked::GatewayError;
use linked_core::{ChatRequest, Message, PromptTag, Role};

fn fast_retry(max_attempts: u32) -> RetryPolicy {
    RetryPolicy { max_attempts, base_delay: Duration::from_millis(1), max_delay: Duration::from_millis(5) }
}

fn backend(server: &Server, attempts: u32) -> HttpBackend {
    HttpBackend::new(&format!("{}/v1/", server.url), "test-model", Some("sk-test".into()), fast_retry(attempts))
        .unwrap()
}

fn request(n: u32) -> ChatRequest {
    let messages = vec![Message::new(Role::System, "be brief"), Message::new(Role::User, "Question: why?")];
    ChatRequest::new(messages, PromptTag::DirectAnswer, 0.7, n)
}

#[test]
fn multi_sample_request_shape_and_choice_order() {
    let server = Server::start(|_, _| (200, chat_body(&["Answer: (1)", "Answer: (2)", "Answer: (3)"], 40, 6)));
    let out = backend(&server, 1).sample(&request(3), &[0, 1, 2]).unwrap();
    let texts: Vec<&str> = out.iter().map(|c| c.text.as_str()).collect();
    assert_eq!(texts, ["Answer: (1)", "Answer: (2)", "Answer: (3)"]);
    assert_eq!((out[0].tokens_in, out[0].tokens_out), (40, 6));
    assert_eq!(out[1].tokens_in + out[2].tokens_out, 0);

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "POST");
    assert_eq!(reqs[0].path, "/v1/chat/completions");
    assert_eq!(reqs[0].header("authorization"), Some("Bearer sk-test"));
    let body = reqs[0].json();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["n"], 3);
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Question: why?");
}

#[test]
fn rate_limit_and_server_errors_are_retried() {
    let server = Server::start(|i, _| match i {
        0 => (429, "{}".into()),
        1 => (503, "busy".into()),
        _ => (200, chat_body(&["ok"], 1, 1)),
    });
    let out = backend(&server, 4).sample(&request(1), &[0]).unwrap();
    assert_eq!(out[0].text, "ok");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retries_give_up_after_max_attempts() {
    let server = Server::start(|_, _| (429, "{}".into()));
    let err = backend(&server, 3).sample(&request(1), &[0]).unwrap_err();
    assert!(matches!(err, GatewayError::RateLimited { attempts: 3 }), "{err}");
    assert_eq!(server.requests().len(), 3);

    let server = Server::start(|_, _| (500, "boom".into()));
    let err = backend(&server, 2).sample(&request(1), &[0]).unwrap_err();
    assert!(matches!(err, GatewayError::Status { status: 500, .. }), "{err}");
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn client_errors_fail_immediately() {
    let server = Server::start(|_, _| (401, r#"{"error":"bad key"}"#.into()));
    let err = backend(&server, 4).sample(&request(1), &[0]).unwrap_err();
    match err {
        GatewayError::Status { status, body } => {
            assert_eq!(status, 401);
            assert!(body.contains("bad key"));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn malformed_bodies_are_reported() {
    for body in ["not json", r#"{"choices": []}"#, r#"{"choices": [{"message": {}}]}"#, r#"{"id": 1}"#] {
        let server = Server::start(move |_, _| (200, body.into()));
        let err = backend(&server, 1).sample(&request(1), &[0]).unwrap_err();
        assert!(matches!(err, GatewayError::Malformed(_)), "{body}: {err}");
    }
}

#[test]
fn rejected_multi_sample_falls_back_to_single_requests() {
    let server = Server::start(|_, r| {
        if r.json()["n"].as_u64() != Some(1) {
            (400, r#"{"error":"n must be 1"}"#.into())
        } else {
            (200, chat_body(&["Answer: (2)"], 10, 2))
        }
    });
    let b = backend(&server, 1);
    let out = b.sample(&request(3), &[0, 1, 2]).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|c| c.text == "Answer: (2)" && c.tokens_in == 10));
    let ns: Vec<u64> = server.requests().iter().map(|r| r.json()["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [3, 1, 1, 1]);

    // The backend remembers and goes straight to single requests.
    b.sample(&request(2), &[0, 1]).unwrap();
    assert_eq!(server.requests().len(), 6);
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let b = HttpBackend::new("http://127.0.0.1:1", "m", None, fast_retry(2)).unwrap();
    let err = b.sample(&request(1), &[0]).unwrap_err();
    assert!(matches!(err, GatewayError::Network { attempts: 2, .. }), "{err}");
}

#[test]
fn gateway_caches_http_responses_and_counts_tokens_once() {
    let server = Server::start(|_, _| (200, chat_body(&["Answer: (1)", "Answer: (3)"], 30, 4)));
    let dir = tempfile::tempdir().unwrap();
    let make = || {
        let cache = ResponseCache::open(dir.path()).unwrap();
        Gateway::new(Arc::new(backend(&server, 1)), Some(cache), 2)
    };
    let gw = make();
    let first = gw.complete(&request(2)).unwrap();
    assert_eq!(first.completions, ["Answer: (1)", "Answer: (3)"]);
    assert!(!first.cached);
    assert_eq!(gw.ledger().tokens(), 34);

    // A fresh gateway over the same cache directory never calls out.
    let gw = make();
    let again = gw.complete(&request(2)).unwrap();
    assert!(again.cached);
    assert_eq!(again.completions, first.completions);
    assert_eq!(again.tokens(), 34);
    assert_eq!(gw.ledger().tokens(), 0);
    assert_eq!(gw.ledger().cache_hits, 2);
    assert_eq!(server.requests().len(), 1);
}
