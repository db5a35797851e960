//! Deterministic completion clients for tests, simulations and offline runs.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::generator::{CompletionClient, ProviderError, ProviderErrorKind};
use super::templates::PromptRequest;

const FILLER: [&str; 12] = [
    "reliable", "sources", "report", "no", "evidence", "for", "this", "and", "experts", "have",
    "checked", "it",
];

/// Always answers with exactly `n` words, opening with the label.
#[derive(Debug)]
pub struct FixedLengthClient {
    n: usize,
    calls: AtomicUsize,
}

impl FixedLengthClient {
    pub fn new(n: usize) -> Self {
        FixedLengthClient {
            n,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn words(n: usize) -> String {
        (0..n)
            .map(|i| FILLER[i % FILLER.len()])
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl CompletionClient for FixedLengthClient {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if self.n == 0 {
            return Ok(String::new());
        }
        let mut words = vec![format!("The headline is {}.", request.label)];
        // "The headline is x." is four words
        let rest = self.n.saturating_sub(4);
        if self.n < 4 {
            return Ok(Self::words(self.n));
        }
        words.push(Self::words(rest));
        Ok(words.join(" ").trim().to_string())
    }
}

/// Replays a fixed script of responses, then repeats the last one.
#[derive(Debug)]
pub struct ScriptedClient {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    last: Mutex<Option<Result<String, ProviderError>>>,
}

impl ScriptedClient {
    pub fn new(script: Vec<Result<String, ProviderError>>) -> Self {
        ScriptedClient {
            script: Mutex::new(script.into()),
            last: Mutex::new(None),
        }
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, _request: &PromptRequest) -> Result<String, ProviderError> {
        let next = self.script.lock().expect("script lock").pop_front();
        let mut last = self.last.lock().expect("last lock");
        match next {
            Some(r) => {
                *last = Some(r.clone());
                r
            }
            None => last.clone().unwrap_or_else(|| {
                Err(ProviderError::new(
                    ProviderErrorKind::InvalidResponse,
                    "script exhausted",
                ))
            }),
        }
    }
}
