//! LLM-backed explanation generation with retries and a shared cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{word_count, AttributeSet, Claim, InterventionText, Veracity};

use super::templates::{build_personalized_prompt, build_zero_shot_prompt, PromptRequest};
use super::{ExplanationSource, InterventionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Network,
    Auth,
    RateLimited,
    Server,
    InvalidResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} from completion provider: {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
    /// Provider-advised wait before the next attempt, when it sent one.
    pub retry_after: Option<Duration>,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            kind,
            message: message.into(),
            retry_after: None,
        }
    }

    pub fn with_retry_after(mut self, wait: Duration) -> Self {
        self.retry_after = Some(wait);
        self
    }
}

/// A hosted text-completion endpoint.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for Arc<C> {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_id: String,
    /// Extra attempts when a completion is 100 words or longer.
    pub retry_limit: usize,
    pub parallelism: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            model_id: "gpt-4-0613".to_string(),
            retry_limit: 2,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    claim_id: String,
    label: Veracity,
    attrs: Option<String>,
    model_id: String,
}

impl CacheKey {
    fn of(req: &PromptRequest) -> Self {
        CacheKey {
            claim_id: req.claim_id.to_string(),
            label: req.label,
            attrs: req.attrs.as_ref().map(AttributeSet::key),
            model_id: req.model_id.clone(),
        }
    }
}

type Slot = Arc<OnceCell<InterventionText>>;

/// Wraps a [`CompletionClient`] with the word-limit retry policy and a
/// get-or-insert cache keyed by `(claim, label, attributes, model)`.
///
/// Concurrent requests for the same key share one provider call. Failed
/// calls are not cached.
pub struct ExplanationGenerator<C> {
    client: C,
    config: GenerationConfig,
    cache: Mutex<HashMap<CacheKey, Slot>>,
    provider_calls: AtomicUsize,
}

impl<C: CompletionClient> ExplanationGenerator<C> {
    pub fn new(client: C, config: GenerationConfig) -> Self {
        ExplanationGenerator {
            client,
            config,
            cache: Mutex::new(HashMap::new()),
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn cached(&self) -> usize {
        self.cache
            .lock()
            .expect("cache lock")
            .values()
            .filter(|slot| slot.get().is_some())
            .count()
    }

    pub fn generate_explanation(
        &self,
        request: &PromptRequest,
    ) -> Result<InterventionText, InterventionError> {
        let slot = {
            let mut cache = self.cache.lock().expect("cache lock");
            cache.entry(CacheKey::of(request)).or_default().clone()
        };
        slot.get_or_try_init(|| self.call_with_retries(request))
            .cloned()
    }

    fn call_with_retries(
        &self,
        request: &PromptRequest,
    ) -> Result<InterventionText, InterventionError> {
        let mut last = String::new();
        for _ in 0..=self.config.retry_limit {
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            let text = self.client.complete(request)?;
            let text = text.trim().to_string();
            if text.is_empty() {
                return Err(ProviderError::new(
                    ProviderErrorKind::InvalidResponse,
                    "empty completion",
                )
                .into());
            }
            let within = word_count(&text) < request.max_words;
            last = text;
            if within {
                return Ok(self.text_for(request, last, false));
            }
        }
        Ok(self.text_for(request, last, true))
    }

    fn text_for(&self, request: &PromptRequest, explanation: String, over_limit: bool) -> InterventionText {
        let mut text = InterventionText::new(
            request.claim_id.clone(),
            request.template_id,
            request.label,
            explanation,
        );
        text.generation_attrs = request.attrs.clone();
        text.over_limit = over_limit;
        text
    }

    /// Generate many explanations with at most `parallelism` in flight.
    pub fn generate_batch(
        &self,
        requests: &[PromptRequest],
    ) -> Vec<Result<InterventionText, InterventionError>> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.parallelism.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| {
            requests
                .par_iter()
                .map(|r| self.generate_explanation(r))
                .collect()
        })
    }
}

impl<C: CompletionClient> ExplanationSource for ExplanationGenerator<C> {
    fn explanation(
        &self,
        claim: &Claim,
        attrs: Option<&AttributeSet>,
    ) -> Result<InterventionText, InterventionError> {
        let request = match attrs {
            None => build_zero_shot_prompt(claim, claim.veracity, &self.config.model_id),
            Some(attrs) => {
                build_personalized_prompt(claim, claim.veracity, attrs, &self.config.model_id)?
            }
        };
        self.generate_explanation(&request)
    }
}
