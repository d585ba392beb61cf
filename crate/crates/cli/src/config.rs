//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use svann_core::svann::{SceneSource, SvannExperimentConfig};

/// A zonal study plus where its outputs go.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: SvannExperimentConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Schema checks that serde cannot express.
    pub fn check(&self) -> Result<()> {
        let e = &self.experiment;
        if e.tile_size == 0 || e.upsample == 0 {
            bail!("tile_size and upsample must be positive");
        }
        if e.indices.is_empty() {
            bail!("at least one index feature is required");
        }
        if let SceneSource::Files { raster, mask, .. } = &e.scene {
            for p in [raster, mask] {
                if !p.exists() {
                    bail!("referenced path {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let cfg = ExperimentConfig { output_dir: Some("runs/a".into()), ..Default::default() };
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let partial = ExperimentConfig::from_json(r#"{"seed": 4, "tile_size": 16}"#).unwrap();
        assert_eq!(partial.experiment.seed, 4);
        assert_eq!(partial.experiment.tile_size, 16);
        assert_eq!(partial.experiment.indices.len(), 2);
        let bare = ExperimentConfig::from_json(r#"{"scene": {"kind": "synthetic"}}"#).unwrap();
        assert_eq!(bare, ExperimentConfig::default());
    }

    #[test]
    fn missing_files_rejected() {
        let text = r#"{"scene": {"kind": "files", "raster": "/nonexistent/a.svr", "mask": "/nonexistent/b.svr", "zones": []}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        assert!(ExperimentConfig::from_json(r#"{"tile_size": 0}"#).is_err());
    }
}
