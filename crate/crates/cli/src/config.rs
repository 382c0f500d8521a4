use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use proofgrade::{ProviderConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Raised for anything wrong with the config file or a flag that names
/// something the config does not define.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Dimension of the built-in `test` provider.
pub const TEST_PROVIDER_DIM: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    /// `None` means the bundled problem set.
    pub problems: Option<PathBuf>,
    pub splits: PathBuf,
    pub models: PathBuf,
    pub cache: PathBuf,
    pub out: PathBuf,
    pub log: PathBuf,
    pub feedback: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "data/corpus.jsonl".into(),
            problems: None,
            splits: "out/splits".into(),
            models: "out/models".into(),
            cache: "out/cache".into(),
            out: "out".into(),
            log: "out/attempts.jsonl".into(),
            feedback: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub provider: Option<String>,
    pub max_attempts: Option<u32>,
    pub retry_after_secs: u64,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            provider: None,
            max_attempts: None,
            retry_after_secs: 5,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    providers: BTreeMap<String, toml::Table>,
    training: TrainConfig,
    paths: Paths,
    server: ServerSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub providers: BTreeMap<String, ProviderConfig>,
    pub training: TrainConfig,
    pub paths: Paths,
    pub server: ServerSection,
}

impl Default for Config {
    fn default() -> Self {
        Self::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}

impl Config {
    /// Relative paths in the file are taken relative to the working
    /// directory, like the flags.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, String> {
        let mut providers = BTreeMap::new();
        providers.insert(
            "test".to_string(),
            ProviderConfig::deterministic("test", TEST_PROVIDER_DIM, 0),
        );
        for (id, mut table) in raw.providers {
            table
                .entry("provider_id")
                .or_insert_with(|| toml::Value::String(id.clone()));
            let cfg: ProviderConfig = toml::Value::Table(table)
                .try_into()
                .map_err(|e| format!("[providers.{id}]: {e}"))?;
            if cfg.provider_id != id {
                return Err(format!("[providers.{id}] declares provider_id {:?}", cfg.provider_id));
            }
            cfg.validate().map_err(|e| format!("[providers.{id}]: {e}"))?;
            providers.insert(id, cfg);
        }
        raw.training.validate().map_err(|e| format!("[training]: {e}"))?;
        Ok(Self {
            providers,
            training: raw.training,
            paths: raw.paths,
            server: raw.server,
        })
    }

    pub fn provider(&self, id: &str) -> Result<&ProviderConfig, ConfigError> {
        self.providers.get(id).ok_or_else(|| {
            let known: Vec<&str> = self.providers.keys().map(String::as_str).collect();
            ConfigError(format!("unknown provider {id:?}; configured: {}", known.join(", ")))
        })
    }

    pub fn model_path(&self, problem_id: &str) -> PathBuf {
        self.paths.models.join(format!("{problem_id}.pgmd"))
    }

    pub fn cache_path(&self, provider_id: &str) -> PathBuf {
        self.paths.cache.join(format!("{provider_id}.pgec"))
    }

    pub fn split_path(&self, problem_id: &str) -> PathBuf {
        self.paths.splits.join(format!("{problem_id}.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proofgrade::embeddings::ProviderKind;

    #[test]
    fn full_file() {
        let cfg = Config::parse(
            r#"
[providers.mathbert]
kind = "file-import"
path = "vectors/mathbert.pgec"
dim = 768
needs_math_merge = true

[providers.remote]
kind = "remote-endpoint"
endpoint = "https://embeddings.example/v1/embeddings"
model = "some-model"
credential_env = "EMBED_TOKEN"
dim = 1536

[training]
epochs_grid = [100, 200]
seed = 4

[paths]
corpus = "corpus.jsonl"
models = "m"

[server]
bind = "0.0.0.0:9000"
max_attempts = 20
"#,
        )
        .unwrap();
        assert_eq!(cfg.providers.len(), 3);
        assert_eq!(cfg.providers["remote"].max_retries, 5);
        assert!(matches!(
            cfg.providers["mathbert"].kind,
            ProviderKind::FileImport { .. }
        ));
        assert_eq!(cfg.training.epochs_grid, vec![100, 200]);
        assert_eq!(cfg.training.batch_size, 128);
        assert_eq!(cfg.paths.models, PathBuf::from("m"));
        assert_eq!(cfg.paths.log, PathBuf::from("out/attempts.jsonl"));
        assert_eq!(cfg.server.max_attempts, Some(20));
        assert_eq!(cfg.model_path("P2"), PathBuf::from("m/P2.pgmd"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("[training]\nseed = 1\nbatch_size = \"big\"\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(Config::parse("[paths]\nnope = 1\n").is_err());
        assert!(Config::parse("[training]\nepochs_grid = [1]\n").is_err());
        let err = Config::parse("[providers.x]\nkind = \"deterministic-test\"\ndim = 0\n").unwrap_err();
        assert!(err.contains("providers.x"), "{err}");
    }

    #[test]
    fn built_in_test_provider() {
        let cfg = Config::default();
        assert_eq!(cfg.provider("test").unwrap().dim, TEST_PROVIDER_DIM);
        assert!(cfg.provider("nope").is_err());
    }
}
