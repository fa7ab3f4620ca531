use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChainBackend, GatewayError, GenerationRequest, RawCompletion, Usage};
use crate::prompt::PromptBundle;

fn default_temperature() -> f64 {
    1.0
}
fn default_max_retries() -> u32 {
    4
}
fn default_timeout_secs() -> f64 {
    60.0
}
fn default_backoff_ms() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// Base URL; requests go to `{endpoint_url}/chat/completions`.
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Name of the environment variable holding the bearer token. No token is
    /// sent when unset.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// First retry delay; doubles on every further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// Process-wide admission rate; unlimited when unset.
    #[serde(default)]
    pub requests_per_second: Option<f64>,
}

impl BackendConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            api_key_env: None,
            backoff_base_ms: default_backoff_ms(),
            requests_per_second: None,
        }
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(GatewayError::Config("endpoint_url is empty".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::Config(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(GatewayError::Config("timeout_secs must be positive".into()));
        }
        if let Some(rps) = self.requests_per_second {
            if !(rps > 0.0) {
                return Err(GatewayError::Config("requests_per_second must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint_url.trim_end_matches('/'))
    }
}

/// Spaces request admissions at least `interval` apart across all threads.
#[derive(Debug)]
struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_second: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next: Mutex::new(Instant::now()),
        }
    }

    fn admit(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    config: BackendConfig,
    client: Client,
    api_key: Option<String>,
    limiter: Option<RateLimiter>,
}

enum Attempt {
    Done(RawCompletion),
    Retry(String),
    Fail(GatewayError),
}

impl HttpBackend {
    /// Reads the API key from the environment. A configured but missing key
    /// is an error here, before any request is made.
    pub fn new(config: BackendConfig) -> Result<Self, GatewayError> {
        config.check()?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                GatewayError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            limiter: config.requests_per_second.map(RateLimiter::new),
            config,
            client,
            api_key,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &PromptBundle) -> Value {
        json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.backoff_base_ms as f64 * 2f64.powi(retry as i32);
        let jitter = rand::rng().random_range(0.5..1.5);
        Duration::from_millis((base * jitter) as u64)
    }

    fn attempt(&self, body: &Value, started: Instant, attempts: u32) -> Attempt {
        if let Some(l) = &self.limiter {
            l.admit();
        }
        let mut req = self.client.post(self.config.url()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Attempt::Fail(GatewayError::Auth {
                status: status.as_u16(),
            });
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        if status == StatusCode::REQUEST_TIMEOUT
            || status == StatusCode::TOO_MANY_REQUESTS
            || status.is_server_error()
        {
            return Attempt::Retry(format!("HTTP {}", status.as_u16()));
        }
        if !status.is_success() {
            return Attempt::Fail(GatewayError::Rejected {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        match parse_envelope(&text) {
            Ok((content, usage)) => Attempt::Done(RawCompletion {
                text: content,
                usage,
                latency: started.elapsed(),
                attempts,
            }),
            Err(e) => Attempt::Fail(e),
        }
    }

    /// Sends one system+user pair and returns the first choice's content.
    pub fn complete(&self, prompt: &PromptBundle) -> Result<RawCompletion, GatewayError> {
        let body = self.request_body(prompt);
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, started, attempts) {
                Attempt::Done(c) => {
                    debug!("completion in {} attempt(s), {:?}", attempts, c.latency);
                    return Ok(c);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason) => {
                    if attempts > self.config.max_retries {
                        return Err(GatewayError::Exhausted {
                            attempts,
                            last: reason,
                        });
                    }
                    let delay = self.backoff(attempts - 1);
                    warn!("attempt {attempts} failed ({reason}); retrying in {delay:?}");
                    thread::sleep(delay);
                }
            }
        }
    }
}

/// Extracts the first choice's message content from a chat-completions body.
fn parse_envelope(body: &str) -> Result<(String, Option<Usage>), GatewayError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedEnvelope(format!("not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedEnvelope("missing choices[0].message.content".into()))?;
    if content.trim().is_empty() {
        return Err(GatewayError::MalformedEnvelope("empty message content".into()));
    }
    let usage = v.get("usage").and_then(|u| {
        Some(Usage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok((content.to_string(), usage))
}

impl ChainBackend for HttpBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<RawCompletion, GatewayError> {
        self.complete(req.prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_content_and_usage() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"[]"}}],"usage":{"prompt_tokens":700,"completion_tokens":90}}"#;
        let (c, u) = parse_envelope(body).unwrap();
        assert_eq!(c, "[]");
        assert_eq!(
            u,
            Some(Usage {
                prompt_tokens: 700,
                completion_tokens: 90
            })
        );
        assert!(matches!(
            parse_envelope(r#"{"choices":[]}"#),
            Err(GatewayError::MalformedEnvelope(_))
        ));
        assert!(parse_envelope("<html>").is_err());
    }

    #[test]
    fn missing_key_fails_before_network() {
        let mut cfg = BackendConfig::new("http://127.0.0.1:9", "m");
        cfg.api_key_env = Some("CHAINSYNTH_TEST_KEY_THAT_IS_NOT_SET".into());
        let err = HttpBackend::new(cfg).unwrap_err();
        assert!(err.to_string().contains("CHAINSYNTH_TEST_KEY_THAT_IS_NOT_SET"));
        assert!(err.is_fatal());
    }

    #[test]
    fn url_joins_cleanly() {
        assert_eq!(
            BackendConfig::new("http://x/v1/", "m").url(),
            "http://x/v1/chat/completions"
        );
    }
}
