//! Engine configuration: a TOML file plus environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use crowdgen_core::aggregate::DEFAULT_K;
use crowdgen_core::reasoning::Backend;
use crowdgen_core::LibraryMode;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const DATA_DIR_ENV: &str = "CROWDGEN_DATA_DIR";
pub const CONFIG_ENV: &str = "CROWDGEN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Seed library; the bundled fixture when unset. Appended responses are
    /// kept in `data_dir/library.json`, which takes over once it exists.
    pub library_path: Option<PathBuf>,
    pub library_mode: LibraryMode,
    pub k: usize,
    pub seed: u64,
    pub subset_seed: u64,
    pub reasoner: Backend,
    pub data_dir: PathBuf,
    pub listen: SocketAddr,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            library_path: None,
            library_mode: LibraryMode::WithLib(30),
            k: DEFAULT_K,
            seed: 0,
            subset_seed: 0,
            reasoner: Backend::Oracle,
            data_dir: PathBuf::from("crowdgen-data"),
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Validation(format!("config: {e}")))
    }

    /// Reads `path` (or defaults), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ServiceError::Io(format!("config {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => EngineConfig::default(),
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.data_dir = PathBuf::from(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.k == 0 {
            return Err(ServiceError::Validation("config: k must be at least 1".into()));
        }
        if let Some(p) = &self.library_path {
            if !p.is_file() {
                return Err(ServiceError::Io(format!("config: library {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = EngineConfig::from_toml(
            r#"
library_mode = "withlib10"
k = 5
data_dir = "/tmp/x"
listen = "0.0.0.0:9000"

[reasoner]
kind = "llm"
model = "some-model"
"#,
        )
        .unwrap();
        assert_eq!(cfg.library_mode, LibraryMode::WithLib(10));
        assert_eq!(cfg.k, 5);
        match &cfg.reasoner {
            Backend::Llm(l) => {
                assert_eq!(l.model, "some-model");
                assert_eq!(l.max_retries, 3);
            }
            Backend::Oracle => panic!(),
        }
        let back = EngineConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(EngineConfig::from_toml("k = 0").unwrap().validate().is_err());
        assert!(EngineConfig::from_toml("api_key = \"x\"").is_err());
        let missing = EngineConfig {
            library_path: Some("/nonexistent/lib.json".into()),
            ..EngineConfig::default()
        };
        assert!(matches!(missing.validate(), Err(ServiceError::Io(_))));
    }
}
