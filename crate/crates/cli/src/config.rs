use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use indirect_phys::TrainConfig;
use serde::{Deserialize, Serialize};

/// Contents of a `--config` TOML file. Every field is optional; command-line
/// flags take precedence over anything set here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Writes the effective configuration as `config.toml` in `dir`. The
    /// file is itself a valid `--config` input.
    pub fn echo(&self, dir: &Path, header: &str) -> Result<()> {
        let body = toml::to_string(self).context("serializing effective config")?;
        let path = dir.join("config.toml");
        fs::write(&path, format!("# {header}\n{body}"))
            .with_context(|| format!("writing {}", path.display()))
    }
}
