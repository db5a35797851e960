//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! feed_size = 5
//! min_interactions = 3
//!
//! [arms]
//! label_only = 1
//! llm_zero_shot = 1
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::InterventionArm;
use crate::personalization::{PriorMode, DEFAULT_ALIGNMENT_THRESHOLD};
use crate::stats::UncertainMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub feed_size: usize,
    pub min_interactions: usize,
    pub balance_feed: bool,
    pub alignment_threshold: f64,
    /// Extra generation attempts for over-long explanations.
    pub retry_limit: usize,
    /// Trial number stamped on new sessions.
    pub trial: u32,
    /// Sync the log to disk after this many appends.
    pub fsync_every: usize,
    /// Users with more completed sessions than this, all with one
    /// judgment label, are treated as spammers.
    pub spam_session_threshold: usize,
    pub prior: PriorMode,
    pub assignment: Assignment,
    pub arms: BTreeMap<InterventionArm, f64>,
    pub generation: GenerationSection,
    pub analysis: AnalysisSection,
    pub files: FilesSection,
}

/// How sessions are assigned to arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Independent weighted draw per session.
    #[default]
    Random,
    /// Permuted blocks: every consecutive block of sessions holds each arm
    /// exactly `weight` times. Weights must be whole numbers.
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub model_id: String,
    pub parallelism: usize,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub uncertain: UncertainMode,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

/// Paths relative to the workspace root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilesSection {
    pub claims: String,
    pub reference_table: Option<String>,
    pub frames: Option<String>,
    pub interventions: Option<String>,
}

pub fn default_arms() -> BTreeMap<InterventionArm, f64> {
    [
        InterventionArm::LabelOnly,
        InterventionArm::ReactionFrame,
        InterventionArm::LlmZeroShot,
        InterventionArm::MethodologyAi,
        InterventionArm::MethodologyHuman,
    ]
    .into_iter()
    .map(|a| (a, 1.0))
    .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            feed_size: 5,
            min_interactions: 3,
            balance_feed: true,
            alignment_threshold: DEFAULT_ALIGNMENT_THRESHOLD,
            retry_limit: 2,
            trial: 1,
            fsync_every: 1,
            spam_session_threshold: 10,
            prior: PriorMode::Uniform,
            assignment: Assignment::Random,
            arms: default_arms(),
            generation: GenerationSection::default(),
            analysis: AnalysisSection::default(),
            files: FilesSection::default(),
        }
    }
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            model_id: "gpt-4-0613".into(),
            parallelism: 4,
            api_key_env: "OPENAI_API_KEY".into(),
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
        }
    }
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            uncertain: UncertainMode::Incorrect,
            bootstrap_resamples: crate::stats::DEFAULT_RESAMPLES,
            confidence: 0.95,
        }
    }
}

impl Default for FilesSection {
    fn default() -> Self {
        FilesSection {
            claims: "claims.jsonl".into(),
            reference_table: None,
            frames: None,
            interventions: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.arms.is_empty() {
            return bad("at least one arm is required");
        }
        if self.arms.values().any(|&w| !(w.is_finite() && w > 0.0)) {
            return bad("arm weights must be positive");
        }
        if self.assignment == Assignment::Blocked && self.arms.values().any(|w| w.fract() != 0.0) {
            return bad("blocked assignment needs whole-number arm weights");
        }
        if self.feed_size == 0 {
            return bad("feed_size must be positive");
        }
        if self.min_interactions > self.feed_size {
            return bad("min_interactions cannot exceed feed_size");
        }
        if !(0.0..=1.0).contains(&self.alignment_threshold) {
            return bad("alignment_threshold must be in [0, 1]");
        }
        if self.fsync_every == 0 {
            return bad("fsync_every must be at least 1");
        }
        if self.analysis.bootstrap_resamples == 0 {
            return bad("bootstrap_resamples must be positive");
        }
        if !(0.0 < self.analysis.confidence && self.analysis.confidence < 1.0) {
            return bad("confidence must be in (0, 1)");
        }
        Ok(())
    }

    /// The two numbers the attention check asks for.
    pub fn attention_answers(&self) -> (usize, usize) {
        (self.min_interactions, self.feed_size)
    }

    pub fn arm_list(&self) -> Vec<(InterventionArm, f64)> {
        self.arms.iter().map(|(a, w)| (*a, *w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.feed_size, 5);
        assert_eq!(cfg.min_interactions, 3);
        assert_eq!(cfg.attention_answers(), (3, 5));
        assert_eq!(cfg.arms.len(), 5);
        assert!(cfg.arms.values().all(|&w| w == 1.0));
        assert!(!cfg.arms.contains_key(&InterventionArm::Control));
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 9\nfeed_size = 6\n[arms]\ncontrol = 1\nllm_personalized = 2.5\n[analysis]\nuncertain = \"exclude\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.arms[&InterventionArm::LlmPersonalized], 2.5);
        assert_eq!(cfg.analysis.uncertain, UncertainMode::Exclude);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("feed_sise = 5").is_err());
        assert!(ExperimentConfig::from_toml("[arms]\nplacebo = 1").is_err());
        assert!(ExperimentConfig::from_toml("[analysis]\nbogus = 1").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("[arms]\nlabel_only = 0").is_err());
        assert!(ExperimentConfig::from_toml("feed_size = 2\nmin_interactions = 3").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
