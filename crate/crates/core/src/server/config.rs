use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::community::PropagationAuthority;
use super::ServerError;
use crate::negotiation::AcceptanceRule;

/// Server settings: a TOML file, then `SOCPROTO_*` environment overrides,
/// then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    /// `unanimity` or `quorum:<fraction>`.
    pub acceptance_rule: String,
    /// `owner-group` or `anyone`.
    pub propagation_authority: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: PathBuf::from("data"),
            acceptance_rule: "unanimity".into(),
            propagation_authority: "owner-group".into(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ServerError> {
        let config: Config = toml::from_str(text).map_err(|e| ServerError::InvalidConfig(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies overrides from `vars`, normally `std::env::vars()`.
    pub fn with_env<I>(mut self, vars: I) -> Result<Self, ServerError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in vars {
            match key.as_str() {
                "SOCPROTO_PORT" => {
                    self.port = value
                        .parse()
                        .map_err(|_| ServerError::InvalidConfig(format!("SOCPROTO_PORT={value:?}")))?
                }
                "SOCPROTO_DATA_DIR" => self.data_dir = PathBuf::from(value),
                "SOCPROTO_ACCEPTANCE_RULE" => self.acceptance_rule = value,
                "SOCPROTO_PROPAGATION_AUTHORITY" => self.propagation_authority = value,
                _ => {}
            }
        }
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), ServerError> {
        self.rule()?;
        self.authority()?;
        Ok(())
    }

    pub fn rule(&self) -> Result<AcceptanceRule, ServerError> {
        self.acceptance_rule
            .parse()
            .map_err(|e: crate::negotiation::NegotiationError| ServerError::InvalidConfig(e.to_string()))
    }

    pub fn authority(&self) -> Result<PropagationAuthority, ServerError> {
        self.propagation_authority.parse()
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }
}
