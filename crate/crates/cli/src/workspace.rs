//! One experiment directory:
//!
//! ```text
//! feedlab.toml            experiment config
//! claims.jsonl            ingested claims
//! reference_table.json    optional, for attribute inference
//! frames.jsonl            optional reaction-frame slots
//! interventions.jsonl     pregenerated LLM explanations
//! logs/                   event store
//! reports/                report artifacts
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use feedlab_core::engine::store::{EVENTS_FILE, SESSIONS_FILE};
use feedlab_core::engine::{Clock, Engine, EngineParts, ExperimentConfig, SystemClock};
use feedlab_core::fixtures;
use feedlab_core::interventions::mock::FixedLengthClient;
use feedlab_core::interventions::{
    ExplanationGenerator, ExplanationSource, FrameTable, GeneratedIntervention, GenerationConfig,
    InterventionProvider, InterventionRenderer, PregeneratedPool,
};
use feedlab_core::{ClaimFormat, Dataset, ReferenceTable};

use crate::error::{CliError, Result};
use crate::openai::OpenAiClient;

pub const CONFIG_FILE: &str = "feedlab.toml";
pub const LOG_DIR: &str = "logs";
pub const REPORT_DIR: &str = "reports";
pub const DEFAULT_INTERVENTIONS: &str = "interventions.jsonl";
/// Copy of the config a log was started with.
pub const CONFIG_LOCK: &str = "config.lock.toml";

/// Where LLM explanations come from when sessions are created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderMode {
    /// Pregenerated pool if present, otherwise the live provider.
    Auto,
    /// Only the pregenerated pool.
    Pool,
    /// The hosted provider configured in `[generation]`.
    Live,
    /// Offline stand-in producing explanations of a fixed word count.
    Mock { words: usize },
}

pub struct ExperimentWorkspace {
    pub root: PathBuf,
    pub config: ExperimentConfig,
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io("read", path, e))
}

/// Write `contents` unless the file exists and `force` is off.
pub fn write_new(path: &Path, contents: &str, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(CliError::Exists(path.to_path_buf()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io("create", dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io("write", path, e))
}

pub fn log_has_data(dir: &Path) -> bool {
    [EVENTS_FILE, SESSIONS_FILE]
        .iter()
        .any(|f| fs::metadata(dir.join(f)).map(|m| m.len() > 0).unwrap_or(false))
}

impl ExperimentWorkspace {
    /// Create the directory skeleton and a default config.
    pub fn init(root: &Path, config: &ExperimentConfig, force: bool) -> Result<Self> {
        write_new(&root.join(CONFIG_FILE), &config.to_toml(), force)?;
        for dir in [LOG_DIR, REPORT_DIR] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|e| CliError::io("create", &p, e))?;
        }
        Ok(ExperimentWorkspace {
            root: root.to_path_buf(),
            config: config.clone(),
        })
    }

    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(CONFIG_FILE);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "{} not found; run `feedlab init {}` first",
                path.display(),
                root.display()
            )));
        }
        Ok(ExperimentWorkspace {
            root: root.to_path_buf(),
            config: ExperimentConfig::load(&path)?,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn claims_path(&self) -> PathBuf {
        self.path(&self.config.files.claims)
    }

    pub fn log_dir(&self) -> PathBuf {
        self.path(LOG_DIR)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.path(REPORT_DIR)
    }

    pub fn interventions_path(&self) -> PathBuf {
        self.path(
            self.config
                .files
                .interventions
                .as_deref()
                .unwrap_or(DEFAULT_INTERVENTIONS),
        )
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let path = self.claims_path();
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "{} not found; run `feedlab ingest` first",
                path.display()
            )));
        }
        Ok(Dataset::load(&path, ClaimFormat::from_path(&path)?)?)
    }

    pub fn reference(&self) -> Result<Option<ReferenceTable>> {
        match &self.config.files.reference_table {
            None => Ok(None),
            Some(rel) => Ok(Some(ReferenceTable::from_json(&read(&self.path(rel))?)?)),
        }
    }

    /// Frame slots from `files.frames`, or a generic fallback for every claim.
    pub fn frames(&self) -> Result<FrameTable> {
        match &self.config.files.frames {
            None => Ok(fixtures::default_frames()),
            Some(rel) => {
                let path = self.path(rel);
                FrameTable::parse_jsonl(&read(&path)?)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn pregenerated_records(&self) -> Result<Option<Vec<GeneratedIntervention>>> {
        let path = self.interventions_path();
        if !path.exists() {
            return Ok(None);
        }
        read(&path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<GeneratedIntervention>(l).map_err(|e| {
                    CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn pregenerated(&self) -> Result<Option<PregeneratedPool>> {
        Ok(self.pregenerated_records()?.map(PregeneratedPool::from_records))
    }

    pub fn generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            model_id: self.config.generation.model_id.clone(),
            retry_limit: self.config.retry_limit,
            parallelism: self.config.generation.parallelism,
        }
    }

    pub fn explanation_source(&self, mode: &ProviderMode) -> Result<Arc<dyn ExplanationSource>> {
        let live = || -> Result<Arc<dyn ExplanationSource>> {
            let client = OpenAiClient::from_env(&self.config.generation)?;
            Ok(Arc::new(ExplanationGenerator::new(client, self.generation_config())))
        };
        match mode {
            ProviderMode::Mock { words } => Ok(Arc::new(ExplanationGenerator::new(
                FixedLengthClient::new(*words),
                self.generation_config(),
            ))),
            ProviderMode::Live => live(),
            ProviderMode::Pool => match self.pregenerated()? {
                Some(pool) => Ok(Arc::new(pool)),
                None => Err(CliError::Usage(format!(
                    "{} not found; run `feedlab generate` first",
                    self.interventions_path().display()
                ))),
            },
            ProviderMode::Auto => match self.pregenerated()? {
                Some(pool) => Ok(Arc::new(pool)),
                None => live().map_err(|e| match e {
                    CliError::MissingCredential(var) => CliError::Usage(format!(
                        "no pregenerated interventions and {var} is not set; run `feedlab generate`, set {var}, or pass --mock"
                    )),
                    other => other,
                }),
            },
        }
    }

    pub fn provider(&self, mode: &ProviderMode) -> Result<Arc<dyn InterventionProvider>> {
        Ok(Arc::new(InterventionRenderer::new(
            self.explanation_source(mode)?,
            Arc::new(self.frames()?),
        )))
    }

    /// Refuse to reuse a log with a different config. A fresh log records
    /// the current one.
    pub fn check_config_lock(&self, log_dir: &Path) -> Result<()> {
        let lock = log_dir.join(CONFIG_LOCK);
        let current = self.config.to_toml();
        if lock.exists() {
            let locked = ExperimentConfig::from_toml(&read(&lock)?)?;
            if locked != self.config {
                return Err(CliError::ConfigChanged(log_dir.to_path_buf()));
            }
            return Ok(());
        }
        fs::create_dir_all(log_dir).map_err(|e| CliError::io("create", log_dir, e))?;
        fs::write(&lock, current).map_err(|e| CliError::io("write", &lock, e))
    }

    pub fn open_engine(
        &self,
        log_dir: &Path,
        mode: &ProviderMode,
        clock: Arc<dyn Clock>,
    ) -> Result<Engine> {
        self.check_config_lock(log_dir)?;
        let parts = EngineParts {
            config: self.config.clone(),
            dataset: Arc::new(self.dataset()?),
            provider: self.provider(mode)?,
            reference: self.reference()?.map(Arc::new),
            clock,
        };
        Ok(Engine::open(log_dir, parts)?)
    }

    pub fn open_engine_now(&self, log_dir: &Path, mode: &ProviderMode) -> Result<Engine> {
        self.open_engine(log_dir, mode, Arc::new(SystemClock))
    }
}
