//! End-to-end zonal study: scene, tiles, per-zone split, zonal training,
//! validation-based selection, test metrics and rule comparison.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::report::ZonalPredictor;
use super::{
    compare_report, evaluate, select_best, split_by_zone, train_zonal, ComparativeReport, FeatureSet, ModelSpec, Mode,
    PixelClassifier, Result, RuleModel, Selection, SvannError, TrainSettings, ZonalRegistry, ZonalSpec, ZonedData,
    Zone,
};
use crate::indices::IndexId;
use crate::metrics::MetricRow;
use crate::raster::{
    bilinear_upsample, generate_synthetic_scene, read_mask, read_raster, tile, upsample_mask, Mask, Raster, SceneSpec,
    Split, SplitFractions,
};
use crate::rng::stream_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneSource {
    /// Generated from a spec; zones are the spec's zone rectangles.
    Synthetic {
        #[serde(default = "default_scene_spec")]
        spec: SceneSpec,
    },
    /// SVR1 raster and mask files with explicit zones.
    Files { raster: PathBuf, mask: PathBuf, zones: Vec<Zone> },
}

fn default_scene_spec() -> SceneSpec {
    SceneSpec::two_zone(64, 32, 30.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvannExperimentConfig {
    pub scene: SceneSource,
    pub seed: u64,
    /// Bilinear upsampling factor applied before tiling; 1 leaves the scene as is.
    pub upsample: usize,
    pub tile_size: usize,
    pub split: Fractions,
    pub mode: Mode,
    /// One zonal candidate per zone and index; OSFA uses all of them together.
    pub indices: Vec<IndexId>,
    pub hidden: Vec<usize>,
    /// Replaces the generated zonal candidates when present.
    pub models: Option<Vec<ModelSpec>>,
    pub osfa: bool,
    pub train: TrainSettings,
}

impl Default for SvannExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneSource::Synthetic { spec: default_scene_spec() },
            seed: 0,
            upsample: 1,
            tile_size: 8,
            split: Fractions { train: 0.6, val: 0.2, test: 0.2 },
            mode: Mode::SvannI,
            indices: vec![IndexId::Ndvi, IndexId::Ndwi],
            hidden: vec![8],
            models: None,
            osfa: true,
            train: TrainSettings::default(),
        }
    }
}

impl SvannExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SvannError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn zonal_models(&self, zones: &[Zone]) -> Vec<ModelSpec> {
        if let Some(m) = &self.models {
            return m.clone();
        }
        zones
            .iter()
            .flat_map(|z| {
                self.indices.iter().map(move |idx| ModelSpec {
                    name: format!("SVANN-{}-{}", z.id, idx.name()),
                    zone: Some(z.id.clone()),
                    features: FeatureSet::rgb_plus(std::slice::from_ref(idx)),
                    hidden: self.hidden.clone(),
                })
            })
            .collect()
    }

    fn load_scene(&self) -> Result<(Raster, Mask, Vec<Zone>)> {
        let (raster, mask, zones) = match &self.scene {
            SceneSource::Synthetic { spec } => {
                let scene = generate_synthetic_scene(spec, stream_seed(self.seed, 0))?;
                let zones = scene.zones.iter().map(|(id, b)| Zone::rect(id.clone(), *b)).collect();
                (scene.raster, scene.mask, zones)
            }
            SceneSource::Files { raster, mask, zones } => {
                let r = read_raster(raster)?;
                let (m, _) = read_mask(mask)?;
                if (m.width(), m.height()) != (r.width(), r.height()) {
                    return Err(SvannError::MissingTruth(format!(
                        "mask is {}x{}, raster is {}x{}",
                        m.width(),
                        m.height(),
                        r.width(),
                        r.height()
                    )));
                }
                (r, m, zones.clone())
            }
        };
        if self.upsample > 1 {
            Ok((bilinear_upsample(&raster, self.upsample)?, upsample_mask(&mask, self.upsample)?, zones))
        } else {
            Ok((raster, mask, zones))
        }
    }
}

pub const SVANN_NAME: &str = "SVANN";
pub const OSFA_NAME: &str = "OSFA";

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub zones: Vec<Zone>,
    pub data: ZonedData,
    pub registry: ZonalRegistry,
    pub osfa: Option<ZonalRegistry>,
    /// Validation metrics of every zonal candidate.
    pub validation: Vec<MetricRow>,
    pub selection: Selection,
    /// Test metrics of the zonal predictor, OSFA and the rule models.
    pub test: Vec<MetricRow>,
    pub comparison: ComparativeReport,
}

impl ExperimentOutcome {
    pub fn selection_csv(&self) -> String {
        let mut out = String::from("zone,model\r\n");
        for (z, m) in &self.selection.choices {
            out.push_str(&format!("{},{}\r\n", crate::metrics::csv_field(z), crate::metrics::csv_field(m)));
        }
        out
    }
}

pub fn run_svann_experiment(cfg: &SvannExperimentConfig) -> Result<ExperimentOutcome> {
    if cfg.tile_size == 0 || cfg.upsample == 0 {
        return Err(SvannError::Config("tile_size and upsample must be positive".into()));
    }
    let (raster, mask, zones) = cfg.load_scene()?;
    let tiles = tile(&raster, &mask, cfg.tile_size, true)?;
    let fractions = SplitFractions::new(cfg.split.train, cfg.split.val, cfg.split.test)?;
    let data = split_by_zone(tiles, &zones, fractions, stream_seed(cfg.seed, 1))?;

    let spec = ZonalSpec { mode: cfg.mode, models: cfg.zonal_models(&zones), settings: cfg.train.clone() };
    let registry = train_zonal(&data, &spec, stream_seed(cfg.seed, 2))?;
    let candidates: Vec<&dyn PixelClassifier> =
        registry.entries().iter().map(|e| &e.model as &dyn PixelClassifier).collect();
    let validation = evaluate(&candidates, &data, Split::Val)?;
    let selection = select_best(&registry, &validation, &data.zone_ids())?;
    let svann: ZonalPredictor = selection.predictor(&registry, &zones, SVANN_NAME)?;

    let osfa = if cfg.osfa {
        let model = ModelSpec {
            name: OSFA_NAME.into(),
            zone: None,
            features: FeatureSet::rgb_plus(&cfg.indices),
            hidden: cfg.hidden.clone(),
        };
        let spec = ZonalSpec { mode: Mode::Osfa, models: vec![model], settings: cfg.train.clone() };
        Some(train_zonal(&data, &spec, stream_seed(cfg.seed, 3))?)
    } else {
        None
    };

    let rules: Vec<RuleModel> = cfg.indices.iter().map(RuleModel::builtin).collect::<Result<_>>()?;
    let interpretable: Vec<&dyn PixelClassifier> = rules.iter().map(|r| r as &dyn PixelClassifier).collect();
    let mut black_boxes: Vec<&dyn PixelClassifier> = vec![&svann];
    if let Some(o) = &osfa {
        black_boxes.push(&o.entries()[0].model);
    }
    let comparison = compare_report(&black_boxes, &interpretable, &data, Split::Test)?;
    let test = comparison.metrics.clone();
    Ok(ExperimentOutcome { zones, data, registry, osfa, validation, selection, test, comparison })
}

#[derive(Debug, Clone)]
pub struct UpsamplingOutcome {
    pub factor: usize,
    pub base: ExperimentOutcome,
    pub upsampled: ExperimentOutcome,
}

impl UpsamplingOutcome {
    /// Test rows of both runs; upsampled models carry an `Up-` prefix.
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = self.base.test.clone();
        rows.extend(self.upsampled.test.iter().map(|r| MetricRow { model: format!("Up-{}", r.model), ..r.clone() }));
        rows
    }
}

/// Runs the study on the scene as given and again after bilinear
/// upsampling by `factor`, with the same tile size in pixels.
pub fn run_upsampling_experiment(cfg: &SvannExperimentConfig, factor: usize) -> Result<UpsamplingOutcome> {
    if factor < 2 {
        return Err(SvannError::Config("upsampling factor must be at least 2".into()));
    }
    let base = run_svann_experiment(&SvannExperimentConfig { upsample: 1, ..cfg.clone() })?;
    let upsampled = run_svann_experiment(&SvannExperimentConfig { upsample: factor, ..cfg.clone() })?;
    Ok(UpsamplingOutcome { factor, base, upsampled })
}
