mod common;

use chainsynth::gateway::{BackendConfig, GatewayError, HttpBackend};
use chainsynth::prompt::{build_prompt, FewShotPool, PromptBundle, FEW_SHOT_K};
use common::{envelope, StubServer};

const REPLY: &str = r#"[{"type":1,"start":"00:00","end":"08:00","participants":[]},{"type":2,"start":"08:30","end":"17:00","participants":[]},{"type":1,"start":"17:30","end":"24:00","participants":[]}]"#;

fn prompt() -> PromptBundle {
    let hh = common::family("h1");
    let stats = common::stats();
    let p = &hh.members[0];
    let shots = FewShotPool::builtin().select(p, FEW_SHOT_K);
    build_prompt(p, Some(&hh), &stats, None, None, &shots).unwrap()
}

fn backend(server: &StubServer) -> HttpBackend {
    let mut cfg = BackendConfig::new(&server.base_url, "test-model");
    cfg.backoff_base_ms = 1;
    cfg.max_retries = 3;
    cfg.timeout_secs = 5.0;
    HttpBackend::new(cfg).unwrap()
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let server = StubServer::start(vec![
        (429, r#"{"error":"slow down"}"#.into()),
        (429, r#"{"error":"slow down"}"#.into()),
        (200, envelope(REPLY)),
    ]);
    let c = backend(&server).complete(&prompt()).unwrap();
    assert_eq!(c.text, REPLY);
    assert_eq!(c.attempts, 3);
    assert_eq!(server.request_count(), 3);
    let usage = c.usage.unwrap();
    assert_eq!((usage.prompt_tokens, usage.completion_tokens), (100, 40));
}

#[test]
fn request_body_carries_model_and_messages() {
    let server = StubServer::start(vec![(200, envelope(REPLY))]);
    let p = prompt();
    backend(&server).complete(&p).unwrap();
    let body: serde_json::Value = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], p.system_text);
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], p.user_text);
}

#[test]
fn client_errors_are_not_retried() {
    let server = StubServer::start(vec![(400, r#"{"error":"bad request"}"#.into())]);
    let err = backend(&server).complete(&prompt()).unwrap_err();
    assert!(matches!(err, GatewayError::Rejected { status: 400, .. }), "{err}");
    assert_eq!(server.request_count(), 1);
}

#[test]
fn auth_failure_is_fatal() {
    let server = StubServer::start(vec![(401, "{}".into())]);
    let err = backend(&server).complete(&prompt()).unwrap_err();
    assert!(matches!(err, GatewayError::Auth { status: 401 }));
    assert!(err.is_fatal());
    assert_eq!(server.request_count(), 1);
}

#[test]
fn server_errors_exhaust_retries() {
    let server = StubServer::start(vec![(503, "{}".into())]);
    let err = backend(&server).complete(&prompt()).unwrap_err();
    match err {
        GatewayError::Exhausted { attempts, .. } => assert_eq!(attempts, 4),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(server.request_count(), 4);
}

#[test]
fn malformed_envelope() {
    let server = StubServer::start(vec![(200, r#"{"choices":[]}"#.into())]);
    let err = backend(&server).complete(&prompt()).unwrap_err();
    assert!(matches!(err, GatewayError::MalformedEnvelope(_)));
}
