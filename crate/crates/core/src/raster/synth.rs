//! Synthetic multi-zone scenes whose labels come from known index rules.

use serde::{Deserialize, Serialize};

use super::{BBox, Band, GeoTransform, Mask, Polygon, PolygonSet, Raster, RasterError, Result, MASK_NODATA, WETLAND};
use crate::indices::{nd_value, IndexId};
use crate::rng::{stream_seed, SplitMix64};
use crate::rules::RuleSet;

pub const SCENE_BANDS: [&str; 4] = ["Blue", "Green", "Red", "NIR"];

/// Which index rule generates a zone's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneRule {
    Ndvi,
    Ndwi,
}

impl ZoneRule {
    pub fn index(self) -> IndexId {
        match self {
            ZoneRule::Ndvi => IndexId::Ndvi,
            ZoneRule::Ndwi => IndexId::Ndwi,
        }
    }
}

/// Reflectance sampling ranges per band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandCover {
    pub blue: (f64, f64),
    pub green: (f64, f64),
    pub red: (f64, f64),
    pub nir: (f64, f64),
}

impl Default for LandCover {
    fn default() -> Self {
        Self { blue: (0.02, 0.3), green: (0.02, 0.5), red: (0.02, 0.5), nir: (0.02, 0.8) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub id: String,
    /// World-coordinate rectangle; pixels whose centers fall inside belong to the zone.
    pub bbox: BBox,
    pub rule: ZoneRule,
    /// Optional override of the builtin ruleset for `rule`.
    #[serde(default)]
    pub ruleset: Option<RuleSet>,
    /// Probability of flipping each generated label.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub cover: LandCover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_pixel_size")]
    pub pixel_size: f64,
    #[serde(default)]
    pub origin: (f64, f64),
    pub zones: Vec<ZoneSpec>,
}

fn default_pixel_size() -> f64 {
    30.0
}

impl SceneSpec {
    /// Two side-by-side zones: `A` labelled by the NDVI rule, `B` by NDWI.
    pub fn two_zone(width: usize, height: usize, pixel_size: f64, noise: f64) -> Self {
        let half = (width / 2) as f64 * pixel_size;
        let full_x = width as f64 * pixel_size;
        let full_y = height as f64 * pixel_size;
        let zone = |id: &str, x0, x1, rule| ZoneSpec {
            id: id.to_string(),
            bbox: BBox::new(x0, 0.0, x1, full_y),
            rule,
            ruleset: None,
            noise,
            cover: LandCover::default(),
        };
        Self {
            width,
            height,
            pixel_size,
            origin: (0.0, 0.0),
            zones: vec![zone("A", 0.0, half, ZoneRule::Ndvi), zone("B", half, full_x, ZoneRule::Ndwi)],
        }
    }

    pub fn transform(&self) -> GeoTransform {
        GeoTransform::new(self.origin.0, self.origin.1, self.pixel_size, self.pixel_size)
    }

    fn validate(&self) -> Result<()> {
        if self.zones.is_empty() {
            return Err(RasterError::Scene("at least one zone is required".into()));
        }
        if !(self.pixel_size > 0.0) {
            return Err(RasterError::PixelSize(self.pixel_size, self.pixel_size));
        }
        for z in &self.zones {
            if !(0.0..1.0).contains(&z.noise) {
                return Err(RasterError::Scene(format!("zone {} noise {} outside [0, 1)", z.id, z.noise)));
            }
            if let Some(rs) = &z.ruleset {
                if !rs.index().matches(&z.rule.index()) {
                    return Err(RasterError::Scene(format!("zone {} ruleset index differs from its rule", z.id)));
                }
            }
        }
        for (i, a) in self.zones.iter().enumerate() {
            for b in &self.zones[i + 1..] {
                if a.bbox.overlaps(&b.bbox) {
                    return Err(RasterError::OverlappingZones(a.id.clone(), b.id.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub raster: Raster,
    pub polygons: PolygonSet,
    pub mask: Mask,
    /// Zone id and rectangle, in spec order.
    pub zones: Vec<(String, BBox)>,
    /// Zone index per pixel, `None` outside every zone.
    pub zone_of_pixel: Vec<Option<usize>>,
}

/// Builds a scene whose mask is each zone's rule applied to its pixels,
/// with labels flipped independently at the zone's noise rate. Pixels
/// outside every zone are nodata in the mask.
pub fn generate_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n = w * h;
    let transform = spec.transform();
    let rulesets: Vec<RuleSet> = spec
        .zones
        .iter()
        .map(|z| {
            z.ruleset
                .clone()
                .unwrap_or_else(|| RuleSet::default_for(&z.rule.index()).expect("builtin rule exists"))
        })
        .collect();

    let mut reflect = SplitMix64::new(stream_seed(seed, 1));
    let mut noise = SplitMix64::new(stream_seed(seed, 2));
    let mut bands: Vec<Vec<f32>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    let mut mask = vec![MASK_NODATA; n];
    let mut zone_of_pixel = vec![None; n];

    for row in 0..h {
        for col in 0..w {
            let (cx, cy) = transform.pixel_center(col, row);
            let zone = spec.zones.iter().position(|z| z.bbox.contains(cx, cy));
            let cover = zone.map(|z| spec.zones[z].cover).unwrap_or_default();
            let draw = |rng: &mut SplitMix64, (lo, hi): (f64, f64)| rng.uniform(lo, hi) as f32;
            let px = [
                draw(&mut reflect, cover.blue),
                draw(&mut reflect, cover.green),
                draw(&mut reflect, cover.red),
                draw(&mut reflect, cover.nir),
            ];
            for (b, v) in bands.iter_mut().zip(px) {
                b.push(v);
            }
            let i = row * w + col;
            zone_of_pixel[i] = zone;
            if let Some(z) = zone {
                let [_, green, red, nir] = px.map(f64::from);
                let value = match spec.zones[z].rule {
                    ZoneRule::Ndvi => nd_value(nir, red),
                    ZoneRule::Ndwi => nd_value(green, nir),
                };
                let label = value.and_then(|v| rulesets[z].classify_value(v)).unwrap_or(MASK_NODATA);
                let flip = noise.bernoulli(spec.zones[z].noise);
                mask[i] = match (label, flip) {
                    (MASK_NODATA, _) => MASK_NODATA,
                    (l, true) => 1 - l,
                    (l, false) => l,
                };
            }
        }
    }

    let raster = Raster::new(
        w,
        h,
        SCENE_BANDS.iter().zip(bands).map(|(name, data)| Band::new(*name, data)).collect(),
        transform,
        None,
    )?;
    let mask = Mask::new(w, h, mask)?;
    let polygons = mask_runs_to_polygons(&mask, &transform);
    Ok(SyntheticScene {
        raster,
        polygons,
        mask,
        zones: spec.zones.iter().map(|z| (z.id.clone(), z.bbox)).collect(),
        zone_of_pixel,
    })
}

/// One rectangle per horizontal run of wetland pixels.
fn mask_runs_to_polygons(mask: &Mask, t: &GeoTransform) -> PolygonSet {
    let mut polygons = Vec::new();
    for row in 0..mask.height() {
        let mut col = 0;
        while col < mask.width() {
            if mask.get(col, row) != WETLAND {
                col += 1;
                continue;
            }
            let start = col;
            while col < mask.width() && mask.get(col, row) == WETLAND {
                col += 1;
            }
            let x0 = t.origin_x + start as f64 * t.pixel_size_x;
            let x1 = t.origin_x + col as f64 * t.pixel_size_x;
            let y0 = t.origin_y + row as f64 * t.pixel_size_y;
            let y1 = y0 + t.pixel_size_y;
            polygons.push(Polygon::rect(x0, y0, x1, y1, "wetland"));
        }
    }
    PolygonSet::new(polygons)
}
