//! JSON-over-HTTP completion client.
//!
//! Wire protocol: `POST` to the configured endpoint with body
//!
//! ```json
//! {"model": "...", "prompt": "...", "temperature": 0.0, "max_tokens": 5}
//! ```
//!
//! and a success response of
//!
//! ```json
//! {"text": "..."}
//! ```
//!
//! Transport failures are retried with exponential backoff up to the
//! configured budget; non-success statuses are protocol errors and are not
//! retried. Evaluation runs keep greedy decoding: temperature 0.0 and a
//! 5-token completion budget.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Completion endpoint configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    /// Full endpoint URL, e.g. `http://127.0.0.1:8000/v1/completions`.
    pub endpoint: String,
    /// Model identifier forwarded verbatim.
    pub model: String,
    /// Sampling temperature; 0.0 selects greedy decoding.
    pub temperature: f64,
    /// Completion budget in new tokens.
    pub max_new_tokens: u32,
    /// Per-request timeout in milliseconds.
    pub timeout_ms: u64,
    /// Retries after the first attempt (transport failures only).
    pub max_retries: u32,
    /// Initial backoff in milliseconds; doubles per retry.
    pub backoff_ms: u64,
}

impl CompletionConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> CompletionConfig {
        CompletionConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            max_new_tokens: 5,
            timeout_ms: 30_000,
            max_retries: 2,
            backoff_ms: 200,
        }
    }
}

/// Request body sent on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Response body expected from the endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

/// Blocking completion client with bounded retries.
pub struct CompletionClient {
    cfg: CompletionConfig,
    http: reqwest::blocking::Client,
}

impl CompletionClient {
    pub fn new(cfg: CompletionConfig) -> Result<CompletionClient> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("http client: {e}")))?;
        Ok(CompletionClient { cfg, http })
    }

    pub fn config(&self) -> &CompletionConfig {
        &self.cfg
    }

    /// Sends one prompt and returns the raw completion text. Parsing the
    /// rating out of the text is a separate step.
    pub fn query(&self, prompt: &str) -> Result<String> {
        let body = CompletionRequest {
            model: self.cfg.model.clone(),
            prompt: prompt.to_string(),
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_new_tokens,
        };
        let attempts = self.cfg.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.http.post(&self.cfg.endpoint).json(&body).send() {
                Err(e) => {
                    last_error = e.to_string();
                }
                Ok(response) => {
                    let status = response.status();
                    if !status.is_success() {
                        let body = response.text().unwrap_or_default();
                        return Err(Error::Protocol {
                            status: status.as_u16(),
                            detail: excerpt(&body),
                        });
                    }
                    let parsed: CompletionResponse = response.json().map_err(|e| Error::Protocol {
                        status: status.as_u16(),
                        detail: format!("unparseable response body: {e}"),
                    })?;
                    return Ok(parsed.text);
                }
            }
        }
        Err(Error::Endpoint {
            attempts,
            msg: last_error,
        })
    }
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        let mut end = LIMIT;
        while !body.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &body[..end])
    }
}
