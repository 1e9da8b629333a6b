//! Engine settings from a plain-text file of `key = value` lines. Blank
//! lines and lines starting with `#` are ignored; unknown keys are errors.
//!
//! ```text
//! embed.provider = local
//! search.threshold = 0.30
//! fetch.simulated.latency_ms = 200
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::embedding::{RemoteConfig, DEFAULT_DIMENSION};
use crate::index::{DEFAULT_K, DEFAULT_THRESHOLD};
use crate::merge::{MergeConfig, DEFAULT_TAU};
use crate::pilot::{PilotConfig, DEFAULT_ALPHA, DEFAULT_SNIPPET_CHARS};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {cause}")]
    Io { path: String, cause: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("{key} = {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedProvider {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchMode {
    Simulated,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub embed_provider: EmbedProvider,
    pub embed_dimension: usize,
    pub embed_remote_endpoint: Option<String>,
    pub embed_remote_timeout_ms: u64,
    pub embed_remote_retries: u32,
    pub search_threshold: f64,
    pub search_k: usize,
    pub pilot_alpha: f64,
    pub pilot_k: usize,
    pub pilot_snippet_chars: usize,
    pub ingest_stopwords_path: Option<PathBuf>,
    pub fetch_mode: FetchMode,
    pub fetch_simulated_latency_ms: u64,
    pub fetch_remote_base: String,
    /// Asset list (site asset format) served by the simulated remote.
    pub fetch_simulated_catalog: Option<PathBuf>,
    /// Directory of `*.flow.json` documents served by the simulated remote.
    pub fetch_simulated_workflows: Option<PathBuf>,
    pub merge_tau: f64,
    pub explore_enabled: bool,
    pub explore_site: Option<PathBuf>,
    pub explore_budget: usize,
    pub service_workers: usize,
    pub exec_threads: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            embed_provider: EmbedProvider::Local,
            embed_dimension: DEFAULT_DIMENSION,
            embed_remote_endpoint: None,
            embed_remote_timeout_ms: 10_000,
            embed_remote_retries: 2,
            search_threshold: DEFAULT_THRESHOLD,
            search_k: DEFAULT_K,
            pilot_alpha: DEFAULT_ALPHA,
            pilot_k: DEFAULT_K,
            pilot_snippet_chars: DEFAULT_SNIPPET_CHARS,
            ingest_stopwords_path: None,
            fetch_mode: FetchMode::Simulated,
            fetch_simulated_latency_ms: 0,
            fetch_remote_base: "sim://remote".into(),
            fetch_simulated_catalog: None,
            fetch_simulated_workflows: None,
            merge_tau: DEFAULT_TAU,
            explore_enabled: false,
            explore_site: None,
            explore_budget: 20,
            service_workers: 2,
            exec_threads: 0,
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value.parse().map_err(|e: V::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn unit_interval(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(key, value)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(invalid(key, value, "must lie in [0, 1]"))
    }
}

fn positive(key: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = parse_value(key, value)?;
    if v == 0 {
        Err(invalid(key, value, "must be at least 1"))
    } else {
        Ok(v)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: i + 1, key },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            cause: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "embed.provider" => {
                self.embed_provider = match value {
                    "local" => EmbedProvider::Local,
                    "remote" => EmbedProvider::Remote,
                    _ => return Err(invalid(key, value, "expected local or remote")),
                }
            }
            "embed.dimension" => self.embed_dimension = positive(key, value)?,
            "embed.remote.endpoint" => self.embed_remote_endpoint = Some(value.to_string()),
            "embed.remote.timeout_ms" => self.embed_remote_timeout_ms = parse_value(key, value)?,
            "embed.remote.retries" => self.embed_remote_retries = parse_value(key, value)?,
            "search.threshold" => self.search_threshold = unit_interval(key, value)?,
            "search.k" => self.search_k = positive(key, value)?,
            "pilot.alpha" => self.pilot_alpha = unit_interval(key, value)?,
            "pilot.k" => self.pilot_k = positive(key, value)?,
            "pilot.snippet_chars" => self.pilot_snippet_chars = positive(key, value)?,
            "ingest.stopwords_path" => self.ingest_stopwords_path = Some(PathBuf::from(value)),
            "fetch.mode" => {
                self.fetch_mode = match value {
                    "simulated" => FetchMode::Simulated,
                    "http" => FetchMode::Http,
                    _ => return Err(invalid(key, value, "expected http or simulated")),
                }
            }
            "fetch.simulated.latency_ms" => self.fetch_simulated_latency_ms = parse_value(key, value)?,
            "fetch.remote.base" => self.fetch_remote_base = value.to_string(),
            "fetch.simulated.catalog" => self.fetch_simulated_catalog = Some(PathBuf::from(value)),
            "fetch.simulated.workflows" => self.fetch_simulated_workflows = Some(PathBuf::from(value)),
            "merge.tau" => self.merge_tau = unit_interval(key, value)?,
            "explore.enabled" => self.explore_enabled = parse_value(key, value)?,
            "explore.site" => self.explore_site = Some(PathBuf::from(value)),
            "explore.budget" => self.explore_budget = positive(key, value)?,
            "service.workers" => self.service_workers = positive(key, value)?,
            "exec.threads" => self.exec_threads = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn pilot_config<T: Real>(&self) -> PilotConfig<T> {
        PilotConfig {
            threshold: T::of(self.search_threshold),
            k: self.pilot_k,
            alpha: T::of(self.pilot_alpha),
            snippet_chars: self.pilot_snippet_chars,
        }
    }

    pub fn merge_config<T: Real>(&self) -> MergeConfig<T> {
        MergeConfig::new(T::of(self.merge_tau)).expect("checked at load")
    }

    /// Remote embedder settings, when that provider is selected.
    pub fn remote_embedder(&self) -> Result<Option<RemoteConfig>, ConfigError> {
        if self.embed_provider != EmbedProvider::Remote {
            return Ok(None);
        }
        let endpoint = self
            .embed_remote_endpoint
            .clone()
            .ok_or_else(|| invalid("embed.remote.endpoint", "", "required when embed.provider = remote"))?;
        let mut remote = RemoteConfig::new(endpoint, self.embed_dimension);
        remote.timeout = Duration::from_millis(self.embed_remote_timeout_ms);
        remote.retries = self.embed_remote_retries;
        Ok(Some(remote))
    }

    pub fn fetch_latency(&self) -> Duration {
        Duration::from_millis(self.fetch_simulated_latency_ms)
    }
}
