//! Run-file loading.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;
use stimsqueeze::{Error, InterferometerConfig, TrackingScenario};

/// Contents of a `--config` file. Both tables are optional; unknown keys are
/// rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub interferometer: Option<InterferometerConfig>,
    pub scenario: Option<TrackingScenario>,
}

impl RunFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed: RunFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        };
        if let Some(cfg) = &parsed.interferometer {
            cfg.validate()?;
        }
        if let Some(scn) = &parsed.scenario {
            scn.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        Ok(parsed)
    }

    /// The file's interferometer, or `fallback` when the table is absent.
    pub fn interferometer_or(
        &self,
        fallback: impl FnOnce() -> stimsqueeze::Result<InterferometerConfig>,
    ) -> anyhow::Result<InterferometerConfig> {
        match self.interferometer {
            Some(cfg) => Ok(cfg),
            None => Ok(fallback()?),
        }
    }
}
