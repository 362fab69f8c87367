//! Declarative audit configuration: one TOML file, overridable per-flag,
//! serializable round-trip, digested into every report for provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ccshap_core::ccshap::{AuditOptions, Estimator};
use ccshap_core::corpus::InputTemplate;
use ccshap_core::hash::fnv1a;

use crate::remote::RemoteEndpoint;

pub const AUTH_TOKEN_ENV: &str = "CCSHAP_AUTH_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Toy,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: PathBuf,
    pub backend: BackendKind,
    pub checkpoint: PathBuf,
    pub model_name: String,
    pub n_samples: u32,
    pub exact_limit: usize,
    pub estimator: Estimator,
    pub antithetic: bool,
    pub max_tokens: usize,
    pub k_top: usize,
    pub per_class_eval_count: usize,
    pub attribute_template: bool,
    pub explanation_prompt: String,
    pub template: String,
    pub jobs: usize,
    /// Empty disables the persistent score cache.
    pub score_cache: PathBuf,
    /// Explicit email ids to audit instead of seeded sampling.
    pub ids: Vec<String>,
    pub remote: Option<RemoteEndpoint>,
    pub train: TrainSection,
    pub ingest: IngestSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub objective: String,
    pub learning_rate: f64,
    pub epochs: u32,
    pub dim: usize,
    pub hash_seed: u64,
    pub margin: f64,
    pub beta: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = ccshap_core::model::TrainConfig::default();
        Self {
            objective: "bce".to_string(),
            learning_rate: base.learning_rate,
            epochs: base.epochs,
            dim: base.dim,
            hash_seed: base.hash_seed,
            margin: base.margin,
            beta: base.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub train_fraction: f64,
    pub stopword_threshold: f64,
    pub language_check_min_tokens: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        let clean = ccshap_core::corpus::CleanOptions::default();
        Self {
            train_fraction: 0.9,
            stopword_threshold: clean.stopword_threshold,
            language_check_min_tokens: clean.language_check_min_tokens,
        }
    }
}

impl Default for AuditConfig {
    fn default() -> Self {
        let options = AuditOptions::default();
        Self {
            seed: options.seed,
            output_dir: PathBuf::from("out"),
            corpus: PathBuf::from("out/val.jsonl"),
            backend: BackendKind::Toy,
            checkpoint: PathBuf::from("out/model.bin"),
            model_name: "toy".to_string(),
            n_samples: options.n_samples,
            exact_limit: options.exact_limit,
            estimator: options.estimator,
            antithetic: options.antithetic,
            max_tokens: options.max_tokens,
            k_top: options.k_top,
            per_class_eval_count: 20,
            attribute_template: options.attribute_template,
            explanation_prompt: options.explanation_prompt,
            template: options.template.text,
            jobs: 1,
            score_cache: PathBuf::new(),
            ids: Vec::new(),
            remote: None,
            train: TrainSection::default(),
            ingest: IngestSection::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("config: {0}")]
    Invalid(String),
}

impl AuditConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config: AuditConfig = toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(source) })?;
        if let Some(remote) = &mut config.remote {
            if remote.auth_token.is_none() {
                remote.auth_token = std::env::var(AUTH_TOKEN_ENV).ok();
            }
        }
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| ConfigError::Invalid(format!("serialize: {e}")))?;
        fs::write(path, text).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("n_samples", self.n_samples as usize),
            ("exact_limit", self.exact_limit),
            ("max_tokens", self.max_tokens),
            ("k_top", self.k_top),
            ("per_class_eval_count", self.per_class_eval_count),
            ("jobs", self.jobs),
            ("train.epochs", self.train.epochs as usize),
            ("train.dim", self.train.dim),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if !(self.ingest.train_fraction > 0.0 && self.ingest.train_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "ingest.train_fraction must be inside (0, 1), got {}",
                self.ingest.train_fraction
            )));
        }
        if self.train.learning_rate <= 0.0 {
            return Err(ConfigError::Invalid("train.learning_rate must be positive".to_string()));
        }
        if self.backend == BackendKind::Remote && self.remote.is_none() {
            return Err(ConfigError::Invalid("backend = remote requires a [remote] section".to_string()));
        }
        if !self.explanation_prompt.contains("{label}") {
            return Err(ConfigError::Invalid("explanation_prompt must contain {label}".to_string()));
        }
        InputTemplate::new(self.template.clone())
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Stable digest of the resolved audit parameters; embedded in every
    /// report. Covers only fields that influence computed values: output
    /// locations, worker counts, and the (transparent) score cache are
    /// excluded so that re-running into a different directory keeps the
    /// same provenance.
    pub fn digest(&self) -> String {
        let remote = self
            .remote
            .as_ref()
            .map(|r| format!("{}|{}", r.base_url, r.model_name))
            .unwrap_or_default();
        let canonical = format!(
            "seed={}\nbackend={:?}\ncheckpoint={}\nmodel={}\nn_samples={}\nexact_limit={}\n\
             estimator={:?}\nantithetic={}\nmax_tokens={}\nk_top={}\nper_class={}\n\
             attribute_template={}\nprompt={}\ntemplate={}\nids={}\nremote={}",
            self.seed,
            self.backend,
            self.checkpoint.display(),
            self.model_name,
            self.n_samples,
            self.exact_limit,
            self.estimator,
            self.antithetic,
            self.max_tokens,
            self.k_top,
            self.per_class_eval_count,
            self.attribute_template,
            self.explanation_prompt,
            self.template,
            self.ids.join(","),
            remote,
        );
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }

    pub fn audit_options(&self) -> AuditOptions {
        AuditOptions {
            template: InputTemplate::new(self.template.clone()),
            estimator: self.estimator,
            n_samples: self.n_samples,
            seed: self.seed,
            k_top: self.k_top,
            max_tokens: self.max_tokens,
            exact_limit: self.exact_limit,
            antithetic: self.antithetic,
            attribute_template: self.attribute_template,
            explanation_prompt: self.explanation_prompt.clone(),
            config_digest: self.digest(),
        }
    }

    pub fn train_config(&self) -> ccshap_core::model::TrainConfig {
        ccshap_core::model::TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            dim: self.train.dim,
            hash_seed: self.train.hash_seed,
            seed: self.seed,
            margin: self.train.margin,
            beta: self.train.beta,
            max_tokens: self.max_tokens,
            template: InputTemplate::new(self.template.clone()),
        }
    }

    pub fn clean_options(&self) -> ccshap_core::corpus::CleanOptions {
        ccshap_core::corpus::CleanOptions {
            stopword_threshold: self.ingest.stopword_threshold,
            language_check_min_tokens: self.ingest.language_check_min_tokens,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        let mut config = AuditConfig::default();
        config.seed = 99;
        config.n_samples = 512;
        config.remote = Some(RemoteEndpoint::new("http://localhost:9", "mock"));
        config.ids = vec!["abc".to_string()];
        config.save(&path).unwrap();
        let loaded = AuditConfig::load(&path).unwrap();
        assert_eq!(loaded, config);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = AuditConfig::default();
        let mut b = AuditConfig::default();
        assert_eq!(a.digest(), b.digest());
        b.seed = 7;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn validation_rejects_zero_samples() {
        let mut config = AuditConfig::default();
        config.n_samples = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn validation_rejects_remote_without_endpoint() {
        let mut config = AuditConfig::default();
        config.backend = BackendKind::Remote;
        assert!(config.validate().is_err());
    }

    #[test]
    fn validation_rejects_bad_fraction() {
        let mut config = AuditConfig::default();
        config.ingest.train_fraction = 1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        AuditConfig::default().validate().unwrap();
    }
}
