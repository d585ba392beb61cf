//! Zonal models, model selection and comparison against rule models.
//!
//! Zones partition a study area. A [`ZonalRegistry`] holds the trained
//! pixel classifiers of one study in one of three modes: `SvannI` (one
//! architecture everywhere, weights per zone), `SvannE` (architecture may
//! also vary per zone) or `Osfa` (a single model for every zone).

mod experiment;
mod model;
mod report;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indices::IndexError;
use crate::metrics::MetricsError;
use crate::network::{Architecture, NetworkError};
use crate::raster::{BBox, Polygon, RasterError, TileSet};
use crate::rules::RuleError;

pub use experiment::{
    run_svann_experiment, run_upsampling_experiment, ExperimentOutcome, Fractions, SceneSource, SvannExperimentConfig,
    UpsamplingOutcome, OSFA_NAME, SVANN_NAME,
};
pub use model::{ConstantModel, FeatureMatrix, FeatureSet, NetworkModel, PixelClassifier, RuleModel};
pub use report::{
    agreement_counts, agreement_rate, compare_report, evaluate, select_best, AgreementEntry, ComparativeReport,
    Selection, ZonalPredictor, AGREEMENT_CSV_HEADER, ALL_ZONES,
};
pub use train::{
    pixel_dataset, split_by_zone, train_zonal, ModelSpec, TrainSettings, ZonalSpec, ZoneTiles, ZonedData,
};

#[derive(Debug, Error)]
pub enum SvannError {
    #[error("zones `{0}` and `{1}` overlap")]
    OverlappingZones(String, String),
    #[error("duplicate zone id `{0}`")]
    DuplicateZone(String),
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("zone `{0}` has no training pixels")]
    EmptyZone(String),
    #[error("registry: {0}")]
    Registry(String),
    #[error("no validation metric for model `{model}` in zone `{zone}`")]
    MissingMetric { model: String, zone: String },
    #[error("missing truth mask: {0}")]
    MissingTruth(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, SvannError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneExtent {
    Rect(BBox),
    /// Exterior ring in world coordinates.
    Polygon(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub extent: ZoneExtent,
}

impl Zone {
    pub fn rect(id: impl Into<String>, bbox: BBox) -> Self {
        Self { id: id.into(), extent: ZoneExtent::Rect(bbox) }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match &self.extent {
            ZoneExtent::Rect(b) => b.contains(x, y),
            ZoneExtent::Polygon(ring) => Polygon::new(ring.clone(), Vec::new(), "").contains(x, y),
        }
    }

    fn ring(&self) -> Vec<(f64, f64)> {
        match &self.extent {
            ZoneExtent::Rect(b) => vec![(b.min_x, b.min_y), (b.max_x, b.min_y), (b.max_x, b.max_y), (b.min_x, b.max_y)],
            ZoneExtent::Polygon(r) => r.clone(),
        }
    }

    /// Positive-area intersection. Shared edges do not count.
    pub fn overlaps(&self, other: &Zone) -> bool {
        if let (ZoneExtent::Rect(a), ZoneExtent::Rect(b)) = (&self.extent, &other.extent) {
            return a.overlaps(b);
        }
        let (ra, rb) = (self.ring(), other.ring());
        let (pa, pb) = (Polygon::new(ra.clone(), vec![], ""), Polygon::new(rb.clone(), vec![], ""));
        let edges = |r: &[(f64, f64)]| {
            let n = r.len();
            (0..n).map(move |i| (r[i], r[(i + 1) % n])).collect::<Vec<_>>()
        };
        let (ea, eb) = (edges(&ra), edges(&rb));
        if ea.iter().any(|&(p, q)| eb.iter().any(|&(r, s)| segments_cross(p, q, r, s))) {
            return true;
        }
        // No proper crossings: one ring is inside the other or they are
        // disjoint. Edge midpoints settle it without hitting shared vertices.
        let mid = |(p, q): ((f64, f64), (f64, f64))| ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
        let centroid = |r: &[(f64, f64)]| {
            let n = r.len() as f64;
            (r.iter().map(|p| p.0).sum::<f64>() / n, r.iter().map(|p| p.1).sum::<f64>() / n)
        };
        let (ca, cb) = (centroid(&ra), centroid(&rb));
        let inside = |poly: &Polygon, (x, y): (f64, f64)| poly.contains(x, y);
        inside(&pb, ca) && pa.contains(ca.0, ca.1)
            || inside(&pa, cb) && pb.contains(cb.0, cb.1)
            || ea.iter().any(|&e| inside(&pb, mid(e)) && !on_boundary(&rb, mid(e)))
            || eb.iter().any(|&e| inside(&pa, mid(e)) && !on_boundary(&ra, mid(e)))
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Proper crossing of two segments; touching or collinear overlap is not a crossing.
fn segments_cross(p: (f64, f64), q: (f64, f64), r: (f64, f64), s: (f64, f64)) -> bool {
    let d1 = orient(r, s, p);
    let d2 = orient(r, s, q);
    let d3 = orient(p, q, r);
    let d4 = orient(p, q, s);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn on_boundary(ring: &[(f64, f64)], pt: (f64, f64)) -> bool {
    let n = ring.len();
    (0..n).any(|i| {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        orient(a, b, pt).abs() < 1e-9
            && pt.0 >= a.0.min(b.0) - 1e-12
            && pt.0 <= a.0.max(b.0) + 1e-12
            && pt.1 >= a.1.min(b.1) - 1e-12
            && pt.1 <= a.1.max(b.1) + 1e-12
    })
}

pub fn validate_zones(zones: &[Zone]) -> Result<()> {
    for (i, a) in zones.iter().enumerate() {
        for b in &zones[i + 1..] {
            if a.id == b.id {
                return Err(SvannError::DuplicateZone(a.id.clone()));
            }
            if a.overlaps(b) {
                return Err(SvannError::OverlappingZones(a.id.clone(), b.id.clone()));
            }
        }
    }
    Ok(())
}

/// Tile indices per zone, in zone order, plus the tiles no zone contains.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneAssignment {
    pub zones: Vec<(String, Vec<usize>)>,
    pub unassigned: Vec<usize>,
}

impl ZoneAssignment {
    pub fn tiles_of(&self, zone: &str) -> Option<&[usize]> {
        self.zones.iter().find(|(id, _)| id == zone).map(|(_, t)| t.as_slice())
    }

    pub fn zone_ids(&self) -> Vec<&str> {
        self.zones.iter().map(|(id, _)| id.as_str()).collect()
    }
}

/// Assigns each tile to the zone containing its center.
pub fn assign_zones(tiles: &TileSet, zones: &[Zone]) -> Result<ZoneAssignment> {
    validate_zones(zones)?;
    let mut out = ZoneAssignment { zones: zones.iter().map(|z| (z.id.clone(), Vec::new())).collect(), unassigned: Vec::new() };
    for (i, t) in tiles.tiles.iter().enumerate() {
        let (x, y) = t.center();
        match zones.iter().position(|z| z.contains(x, y)) {
            Some(z) => out.zones[z].1.push(i),
            None => out.unassigned.push(i),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    #[default]
    #[serde(rename = "svann-i")]
    SvannI,
    #[serde(rename = "svann-e")]
    SvannE,
    #[serde(rename = "osfa")]
    Osfa,
}

impl std::str::FromStr for Mode {
    type Err = SvannError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "svann-i" => Ok(Mode::SvannI),
            "svann-e" => Ok(Mode::SvannE),
            "osfa" => Ok(Mode::Osfa),
            other => Err(SvannError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// A trained model and the zone it serves; `None` serves every zone.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub zone: Option<String>,
    pub model: NetworkModel,
}

/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalRegistry {
    mode: Mode,
    entries: Vec<RegistryEntry>,
}

impl ZonalRegistry {
    pub fn new(mode: Mode, entries: Vec<RegistryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SvannError::Registry("no entries".into()));
        }
        match mode {
            Mode::SvannI => {
                let first: &Architecture = entries[0].model.net.architecture();
                if entries.iter().any(|e| e.model.net.architecture() != first) {
                    return Err(SvannError::Registry("svann-i requires one architecture for every zone".into()));
                }
                if entries.iter().any(|e| e.zone.is_none()) {
                    return Err(SvannError::Registry("svann-i entries must name their zone".into()));
                }
            }
            Mode::SvannE => {
                if entries.iter().any(|e| e.zone.is_none()) {
                    return Err(SvannError::Registry("svann-e entries must name their zone".into()));
                }
            }
            Mode::Osfa => {
                if entries.len() != 1 || entries[0].zone.is_some() {
                    return Err(SvannError::Registry("osfa requires exactly one entry serving all zones".into()));
                }
            }
        }
        let mut names: Vec<&str> = entries.iter().map(|e| e.model.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(SvannError::Registry("model names must be unique".into()));
        }
        Ok(Self { mode, entries })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Models serving `zone`, in listed order.
    pub fn candidates(&self, zone: &str) -> Vec<&NetworkModel> {
        self.entries
            .iter()
            .filter(|e| e.zone.as_deref().is_none_or(|z| z == zone))
            .map(|e| &e.model)
            .collect()
    }

    pub fn model(&self, name: &str) -> Option<&NetworkModel> {
        self.entries.iter().map(|e| &e.model).find(|m| m.name == name)
    }
}
