//! JSON-over-HTTP plumbing shared by the embedding and question-generation
//! API clients: bearer-token POSTs, bounded exponential backoff, and a
//! scriptable replay transport for offline tests.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

/// Environment variable holding the API key.
pub const ENV_API_KEY: &str = "IDC_API_KEY";
/// Environment variable holding the API base URL.
pub const ENV_API_URL: &str = "IDC_API_URL";

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("missing credential: set {0}")]
    MissingCredential(&'static str),
    #[error("missing endpoint: set {0}")]
    MissingEndpoint(&'static str),
    #[error("HTTP {status} from {url}: {detail}")]
    Status {
        url: String,
        status: u16,
        detail: String,
    },
    #[error("connection to {url} failed: {detail}")]
    Connection { url: String, detail: String },
    #[error("invalid JSON from {url}: {detail}")]
    BadJson { url: String, detail: String },
    #[error("giving up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: usize,
        #[source]
        last: Box<HttpError>,
    },
}

/// API endpoint plus credential, resolved from the environment.
#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub base_url: String,
    pub api_key: String,
}

impl ApiConfig {
    /// Reads `IDC_API_URL` and `IDC_API_KEY`. Keys are never accepted via
    /// flags or config files.
    pub fn from_env() -> Result<Self, HttpError> {
        let api_key =
            std::env::var(ENV_API_KEY).map_err(|_| HttpError::MissingCredential(ENV_API_KEY))?;
        let base_url =
            std::env::var(ENV_API_URL).map_err(|_| HttpError::MissingEndpoint(ENV_API_URL))?;
        Ok(ApiConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        })
    }
}

/// Raw response handed back by a transport.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST; implementations decide how (network or replay).
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, api_key: &str, body: &Value) -> Result<HttpResponse, HttpError>;
}

/// Retry schedule: up to `max_retries` retries after the first attempt,
/// sleeping `base_delay * 2^attempt` between tries.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Same retry counts with zero sleep, for tests.
    pub fn without_delay() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::ZERO,
        }
    }
}

/// POSTs `body`, retrying on 429/5xx statuses and connection failures with
/// exponential backoff. Other statuses (401, 404, ...) fail immediately.
/// A successful response is parsed as JSON.
pub fn post_json_with_retry(
    transport: &dyn HttpTransport,
    policy: RetryPolicy,
    url: &str,
    api_key: &str,
    body: &Value,
) -> Result<Value, HttpError> {
    let mut attempt: u32 = 0;
    loop {
        let retryable = match transport.post_json(url, api_key, body) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                return serde_json::from_str(&resp.body).map_err(|e| HttpError::BadJson {
                    url: url.to_string(),
                    detail: e.to_string(),
                });
            }
            Ok(resp) if resp.status == 429 || resp.status >= 500 => HttpError::Status {
                url: url.to_string(),
                status: resp.status,
                detail: truncate(&resp.body),
            },
            Ok(resp) => {
                return Err(HttpError::Status {
                    url: url.to_string(),
                    status: resp.status,
                    detail: truncate(&resp.body),
                });
            }
            Err(e @ HttpError::Connection { .. }) => e,
            Err(e) => return Err(e),
        };
        if attempt >= policy.max_retries {
            return Err(HttpError::Exhausted {
                attempts: attempt as usize + 1,
                last: Box::new(retryable),
            });
        }
        let delay = policy
            .base_delay
            .saturating_mul(2u32.saturating_pow(attempt));
        log::warn!("request to {url} failed ({retryable}); retrying in {delay:?}");
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        attempt += 1;
    }
}

fn truncate(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.chars().count() <= LIMIT {
        body.to_string()
    } else {
        let cut: String = body.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}

/// Network transport backed by a blocking HTTP client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .connect_timeout(Duration::from_secs(10))
            .build()
            .expect("HTTP client construction cannot fail with static options");
        ReqwestTransport { client }
    }
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, api_key: &str, body: &Value) -> Result<HttpResponse, HttpError> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(api_key)
            .json(body)
            .send()
            .map_err(|e| HttpError::Connection {
                url: url.to_string(),
                detail: e.to_string(),
            })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| HttpError::Connection {
            url: url.to_string(),
            detail: e.to_string(),
        })?;
        Ok(HttpResponse { status, body })
    }
}

/// One scripted step for [`ReplayTransport`].
#[derive(Debug, Clone)]
pub enum ReplayStep {
    /// Respond with this status and body.
    Respond { status: u16, body: String },
    /// Simulate a connection failure.
    ConnectionError,
}

impl ReplayStep {
    pub fn ok(body: &Value) -> Self {
        ReplayStep::Respond {
            status: 200,
            body: body.to_string(),
        }
    }

    pub fn status(status: u16, body: &str) -> Self {
        ReplayStep::Respond {
            status,
            body: body.to_string(),
        }
    }
}

/// Transport that replays a fixed script of responses and records every
/// request, enabling offline tests of the API clients.
pub struct ReplayTransport {
    script: Mutex<VecDeque<ReplayStep>>,
    requests: Mutex<Vec<(String, Value)>>,
}

impl ReplayTransport {
    pub fn new(script: Vec<ReplayStep>) -> Self {
        ReplayTransport {
            script: Mutex::new(script.into()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Every `(url, body)` received so far, in order.
    pub fn requests(&self) -> Vec<(String, Value)> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl HttpTransport for ReplayTransport {
    fn post_json(
        &self,
        url: &str,
        _api_key: &str,
        body: &Value,
    ) -> Result<HttpResponse, HttpError> {
        self.requests
            .lock()
            .expect("request log poisoned")
            .push((url.to_string(), body.clone()));
        let step = self.script.lock().expect("script poisoned").pop_front();
        match step {
            Some(ReplayStep::Respond { status, body }) => Ok(HttpResponse { status, body }),
            Some(ReplayStep::ConnectionError) => Err(HttpError::Connection {
                url: url.to_string(),
                detail: "simulated connection failure".into(),
            }),
            None => Err(HttpError::Connection {
                url: url.to_string(),
                detail: "replay script exhausted".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn call(t: &ReplayTransport) -> Result<Value, HttpError> {
        post_json_with_retry(
            t,
            RetryPolicy::without_delay(),
            "http://example.test/things",
            "k",
            &json!({"input": 1}),
        )
    }

    #[test]
    fn success_parses_json_body() {
        let t = ReplayTransport::new(vec![ReplayStep::ok(&json!({"ok": true}))]);
        let v = call(&t).unwrap();
        assert_eq!(v, json!({"ok": true}));
        let reqs = t.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].0, "http://example.test/things");
        assert_eq!(reqs[0].1, json!({"input": 1}));
    }

    #[test]
    fn rate_limit_then_success_retries() {
        let t = ReplayTransport::new(vec![
            ReplayStep::status(429, "slow down"),
            ReplayStep::ok(&json!({"ok": 2})),
        ]);
        assert_eq!(call(&t).unwrap(), json!({"ok": 2}));
        assert_eq!(t.requests().len(), 2);
    }

    #[test]
    fn connection_error_then_success_retries() {
        let t = ReplayTransport::new(vec![
            ReplayStep::ConnectionError,
            ReplayStep::ok(&json!({"ok": 3})),
        ]);
        assert_eq!(call(&t).unwrap(), json!({"ok": 3}));
        assert_eq!(t.requests().len(), 2);
    }

    #[test]
    fn server_errors_exhaust_after_six_attempts() {
        let t = ReplayTransport::new(vec![ReplayStep::status(500, "boom"); 6]);
        let err = call(&t).unwrap_err();
        match err {
            HttpError::Exhausted { attempts, last } => {
                assert_eq!(attempts, 6);
                assert!(matches!(*last, HttpError::Status { status: 500, .. }));
            }
            other => panic!("expected exhaustion, got {other}"),
        }
        assert_eq!(t.requests().len(), 6);
    }

    #[test]
    fn auth_failure_does_not_retry() {
        let t = ReplayTransport::new(vec![
            ReplayStep::status(401, "bad key"),
            ReplayStep::ok(&json!({})),
        ]);
        let err = call(&t).unwrap_err();
        assert!(
            matches!(err, HttpError::Status { status: 401, .. }),
            "got {err}"
        );
        assert_eq!(t.requests().len(), 1);
    }

    #[test]
    fn malformed_success_body_is_an_error() {
        let t = ReplayTransport::new(vec![ReplayStep::status(200, "not json")]);
        assert!(matches!(call(&t).unwrap_err(), HttpError::BadJson { .. }));
    }

    #[test]
    fn api_config_from_env() {
        // Single test covers all env cases to avoid races on process-global
        // environment state.
        std::env::remove_var(ENV_API_KEY);
        std::env::remove_var(ENV_API_URL);
        let err = ApiConfig::from_env().unwrap_err();
        assert!(err.to_string().contains("missing credential"), "got: {err}");
        assert!(err.to_string().contains(ENV_API_KEY));

        std::env::set_var(ENV_API_KEY, "secret");
        let err = ApiConfig::from_env().unwrap_err();
        assert!(err.to_string().contains(ENV_API_URL));

        std::env::set_var(ENV_API_URL, "http://api.test/v1/");
        let cfg = ApiConfig::from_env().unwrap();
        assert_eq!(cfg.base_url, "http://api.test/v1");
        assert_eq!(cfg.api_key, "secret");

        std::env::remove_var(ENV_API_KEY);
        std::env::remove_var(ENV_API_URL);
    }
}
