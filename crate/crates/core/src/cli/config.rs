use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compilesvc::CompilerMode;
use crate::pipeline::SessionConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("invalid value for {var}: {value}")]
    Env { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub listen: String,
    pub data_dir: Option<PathBuf>,
    pub fixtures_dir: PathBuf,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            listen: "127.0.0.1:8080".into(),
            data_dir: None,
            fixtures_dir: PathBuf::from("fixtures/scenarios"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerSection {
    pub mode: CompilerMode,
    /// Worker address for remote mode.
    pub addr: String,
}

impl Default for CompilerSection {
    fn default() -> Self {
        CompilerSection {
            mode: CompilerMode::InProcess,
            addr: "127.0.0.1:7878".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    /// Directory with `reasoner.txt`, `coder.txt` and `optimizer.txt`; built-in
    /// prompts are used when unset.
    pub dir: Option<PathBuf>,
}

/// Engine configuration: a TOML file, then `PARLOGUE_*` environment overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub server: ServerSection,
    pub compiler: CompilerSection,
    pub session: SessionConfig,
    pub prompts: PromptsSection,
}

impl EngineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: origin.to_string(),
            source,
        })
    }

    /// Reads `path` if given (defaults otherwise) and applies overrides from `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Self::from_toml(&text, &p.display().to_string())?
            }
            None => Self::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |var: &str| env(var).filter(|v| !v.is_empty());
        if let Some(v) = get("PARLOGUE_LISTEN") {
            self.server.listen = v;
        }
        if let Some(v) = get("PARLOGUE_DATA_DIR") {
            self.server.data_dir = Some(v.into());
        }
        if let Some(v) = get("PARLOGUE_FIXTURES_DIR") {
            self.server.fixtures_dir = v.into();
        }
        if let Some(v) = get("PARLOGUE_COMPILER_MODE") {
            self.compiler.mode = match v.as_str() {
                "in_process" => CompilerMode::InProcess,
                "remote" => CompilerMode::Remote,
                _ => {
                    return Err(ConfigError::Env {
                        var: "PARLOGUE_COMPILER_MODE",
                        value: v,
                    })
                }
            };
        }
        if let Some(v) = get("PARLOGUE_COMPILER_ADDR") {
            self.compiler.addr = v;
        }
        if let Some(v) = get("PARLOGUE_PROMPTS_DIR") {
            self.prompts.dir = Some(v.into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let text = r#"
            [server]
            listen = "0.0.0.0:9000"

            [compiler]
            mode = "remote"
            addr = "10.0.0.2:7878"

            [session]
            validator = false
        "#;
        let mut c = EngineConfig::from_toml(text, "test").unwrap();
        assert_eq!(c.compiler.mode, CompilerMode::Remote);
        assert!(!c.session.validator);
        assert_eq!(c.session.review_rounds, 2);
        c.apply_env(|k| (k == "PARLOGUE_COMPILER_MODE").then(|| "in_process".to_string())).unwrap();
        assert_eq!(c.compiler.mode, CompilerMode::InProcess);
        assert_eq!(c.server.listen, "0.0.0.0:9000");
    }

    #[test]
    fn unknown_keys_and_bad_env_are_errors() {
        assert!(EngineConfig::from_toml("[server]\nport = 1\n", "t").is_err());
        let mut c = EngineConfig::default();
        assert!(c.apply_env(|_| Some("sideways".into())).is_err());
    }
}
