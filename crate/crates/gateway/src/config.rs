//! Service configuration: a TOML file, with provider secrets read from the
//! environment only.

use std::net::IpAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use persona_core::generate::{DEFAULT_EVIDENCE_K, DEFAULT_GROUNDING_RETRIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LlmBackend {
    /// Deterministic offline mock.
    Mock,
    /// Recorded completions from `llm_fixtures`.
    Replay,
    /// Remote chat completions, recorded into `llm_fixtures` when set.
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedBackend {
    /// Offline hashing embedder.
    Test,
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Allowed browser origin for the studio UI; no CORS layer when unset.
    pub cors_origin: Option<String>,
    pub index_dir: PathBuf,
    /// Curated corpus used for the prevalence map.
    pub corpus: PathBuf,
    pub persona_dir: PathBuf,
    pub session_dir: PathBuf,
    pub templates_dir: Option<PathBuf>,
    pub glosses: Option<PathBuf>,
    pub llm: LlmBackend,
    pub llm_fixtures: Option<PathBuf>,
    pub embedder: EmbedBackend,
    pub k: usize,
    pub grounding_retries: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            cors_origin: None,
            index_dir: "data/index".into(),
            corpus: "data/curated.jsonl".into(),
            persona_dir: "data/personas".into(),
            session_dir: "data/sessions".into(),
            templates_dir: None,
            glosses: None,
            llm: LlmBackend::Mock,
            llm_fixtures: None,
            embedder: EmbedBackend::Test,
            k: DEFAULT_EVIDENCE_K,
            grounding_retries: DEFAULT_GROUNDING_RETRIES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl GatewayConfig {
    /// Relative paths in the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: GatewayConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate().map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.index_dir);
        fix(&mut self.corpus);
        fix(&mut self.persona_dir);
        fix(&mut self.session_dir);
        for p in [&mut self.templates_dir, &mut self.glosses, &mut self.llm_fixtures].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.llm == LlmBackend::Replay && self.llm_fixtures.is_none() {
            return Err("llm = \"replay\" needs llm_fixtures".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gateway.toml");
        std::fs::write(&path, "port = 9000\nindex_dir = \"idx\"\nllm = \"mock\"\n").unwrap();
        let cfg = GatewayConfig::load(&path).unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.index_dir, dir.path().join("idx"));
        assert_eq!(cfg.k, 8);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gateway.toml");
        std::fs::write(&path, "prot = 1\n").unwrap();
        assert!(matches!(GatewayConfig::load(&path), Err(ConfigError::Parse { .. })));
        std::fs::write(&path, "llm = \"replay\"\n").unwrap();
        assert!(matches!(GatewayConfig::load(&path), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn shipped_example_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/gateway.toml");
        let cfg = GatewayConfig::load(&path).unwrap();
        assert_eq!(cfg.llm, LlmBackend::Mock);
        assert!(cfg.templates_dir.unwrap().join("compile.txt").is_file());
    }
}
