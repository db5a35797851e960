//! Chat-completions client for hosted LLM explanation generation.

use std::time::Duration;

use feedlab_core::engine::config::GenerationSection;
use feedlab_core::interventions::{CompletionClient, PromptRequest, ProviderError, ProviderErrorKind};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

pub struct OpenAiClient {
    endpoint: String,
    api_key: String,
    http: Client,
}

impl OpenAiClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        let http = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        OpenAiClient {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            http,
        }
    }

    /// Reads the key from the variable named in the config.
    pub fn from_env(section: &GenerationSection) -> Result<Self> {
        let key = std::env::var(&section.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| CliError::MissingCredential(section.api_key_env.clone()))?;
        Ok(OpenAiClient::new(section.endpoint.clone(), key))
    }
}

fn classify(status: StatusCode) -> ProviderErrorKind {
    match status.as_u16() {
        401 | 403 => ProviderErrorKind::Auth,
        429 => ProviderErrorKind::RateLimited,
        500..=599 => ProviderErrorKind::Server,
        _ => ProviderErrorKind::InvalidResponse,
    }
}

impl CompletionClient for OpenAiClient {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.filled_prompt}],
        });
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::new(ProviderErrorKind::Network, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|s| s.is_finite() && *s >= 0.0)
                .map(Duration::from_secs_f64);
            let text = resp.text().unwrap_or_default();
            let mut err = ProviderError::new(classify(status), format!("HTTP {status}: {text}"));
            if let Some(wait) = retry_after {
                err = err.with_retry_after(wait);
            }
            return Err(err);
        }
        let value: Value = resp
            .json()
            .map_err(|e| ProviderError::new(ProviderErrorKind::InvalidResponse, e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| {
                ProviderError::new(ProviderErrorKind::InvalidResponse, "no message content in response")
            })
    }
}
