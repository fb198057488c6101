//! TOML configuration: a `[generator]` table and an `[experiment]` table,
//! both optional and defaulted field by field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::ExperimentConfig;
use crate::error::{Error, Result};
use crate::synth::GeneratorConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub generator: GeneratorConfig,
    pub experiment: ExperimentConfig,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: FileConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_owned(),
            }
        })?;
        cfg.generator.validate()?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
