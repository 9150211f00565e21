//! Blocking JSON-over-HTTP client for model servers.

use std::time::Duration;

use serde_json::Value;

use super::wire::Transport;
use crate::error::{Error, Result};

/// Posts wire requests to `{base_url}{endpoint}`.
///
/// Transport failures (connection errors, timeouts, 5xx) are retried with
/// exponential backoff; everything else fails immediately.
pub struct HttpTransport {
    base_url: String,
    client: reqwest::blocking::Client,
    attempts: u32,
    backoff: Duration,
}

impl HttpTransport {
    pub const DEFAULT_ATTEMPTS: u32 = 3;

    pub fn new(base_url: &str, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            attempts: Self::DEFAULT_ATTEMPTS,
            backoff: Duration::from_millis(200),
        })
    }

    pub fn with_retry(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn post_once(&self, endpoint: &str, body: &Value) -> Result<Value> {
        let url = format!("{}{}", self.base_url, endpoint);
        let response = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(Error::Transport(format!("{url}: HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Error::Protocol(format!("{url}: HTTP {status}")));
        }
        let bytes = response
            .bytes()
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Protocol(format!("{url}: reply is not JSON: {e}")))
    }
}

impl Transport for HttpTransport {
    fn call(&self, endpoint: &str, body: &Value) -> Result<Value> {
        let mut delay = self.backoff;
        let mut attempt = 1;
        loop {
            match self.post_once(endpoint, body) {
                Err(e) if e.is_retryable() && attempt < self.attempts => {
                    log::warn!("{endpoint} attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
