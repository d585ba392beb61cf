//! Gridded multi-band reflectance data and the preprocessing pipeline.
//!
//! World coordinates follow the raster's affine transform:
//! `x = origin_x + col * pixel_size_x`, `y = origin_y + row * pixel_size_y`.
//! Both pixel sizes are positive, so rows grow with `y`. Pixel `(col, row)`
//! covers `[x, x + psx) × [y, y + psy)` and its center sits half a pixel in.

mod format;
mod ops;
mod polygon;
mod synth;
mod tile;

use std::collections::HashSet;

use thiserror::Error;

pub use format::{read_mask, read_raster, read_raster_from, write_mask, write_raster, write_raster_to, MAGIC};
pub use ops::{bilinear_upsample, crop, upsample_mask};
pub use polygon::{polygons_from_geojson, polygons_to_geojson, rasterize_polygons, read_polygons, write_polygons, Polygon, PolygonSet, Ring};
pub use synth::{generate_synthetic_scene, LandCover, SceneSpec, SyntheticScene, ZoneRule, ZoneSpec, SCENE_BANDS};
pub use tile::{split_dataset, tile, tile_grid, Split, SplitFractions, SplitWarning, Tile, TileSet};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic: file does not start with the SVR1 header")]
    BadMagic,
    #[error("truncated header: needed {needed} bytes, found {found}")]
    TruncatedHeader { needed: usize, found: usize },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("header/payload length mismatch: header implies {expected} payload bytes, file holds {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("band `{name}` has {len} values, expected {expected}")]
    BandLength { name: String, len: usize, expected: usize },
    #[error("duplicate band name `{0}`")]
    DuplicateBand(String),
    #[error("pixel sizes must be positive, got ({0}, {1})")]
    PixelSize(f64, f64),
    #[error("nodata sentinel must be finite")]
    NodataNotFinite,
    #[error("mask value {value} at index {index} is not one of 0, 1, 255")]
    MaskValue { index: usize, value: f32 },
    #[error("mask container must hold exactly one band, found {0}")]
    MaskBands(usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
    #[error("bounding box does not intersect the raster extent")]
    EmptyIntersection,
    #[error("upsample factor must be at least 1")]
    ZeroFactor,
    #[error("tile size must be at least 1")]
    ZeroTileSize,
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error("polygon {index} has a degenerate ring with {distinct} distinct vertices")]
    DegenerateRing { index: usize, distinct: usize },
    #[error("geojson: {0}")]
    GeoJson(String),
    #[error("zones {0} and {1} overlap")]
    OverlappingZones(String, String),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// Affine pixel-to-world mapping without rotation terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size_x: f64, pixel_size_y: f64) -> Self {
        Self { origin_x, origin_y, pixel_size_x, pixel_size_y }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    /// World coordinate of the center of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size_x,
            self.origin_y + (row as f64 + 0.5) * self.pixel_size_y,
        )
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.origin_x, self.origin_y, self.pixel_size_x, self.pixel_size_y]
    }
}

/// Axis-aligned world rectangle, half-open on the max side.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x < self.max_x && y >= self.min_y && y < self.max_y
    }

    /// True when the two rectangles share positive area.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub data: Vec<f32>,
}

impl Band {
    pub fn new(name: impl Into<String>, data: Vec<f32>) -> Self {
        Self { name: name.into(), data }
    }
}

/// Borrowed band together with the grid shape it lives on.
#[derive(Debug, Clone, Copy)]
pub struct BandView<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f32],
    pub nodata: Option<f32>,
}

/// Multi-band raster. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: Vec<Band>,
    transform: GeoTransform,
    nodata: Option<f32>,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        bands: Vec<Band>,
        transform: GeoTransform,
        nodata: Option<f32>,
    ) -> Result<Self> {
        let expected = width * height;
        let mut seen = HashSet::new();
        for band in &bands {
            if band.data.len() != expected {
                return Err(RasterError::BandLength {
                    name: band.name.clone(),
                    len: band.data.len(),
                    expected,
                });
            }
            if !seen.insert(band.name.as_str()) {
                return Err(RasterError::DuplicateBand(band.name.clone()));
            }
        }
        if !(transform.pixel_size_x > 0.0 && transform.pixel_size_y > 0.0) {
            return Err(RasterError::PixelSize(transform.pixel_size_x, transform.pixel_size_y));
        }
        if nodata.is_some_and(|v| !v.is_finite()) {
            return Err(RasterError::NodataNotFinite);
        }
        Ok(Self { width, height, bands, transform, nodata })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn nodata(&self) -> Option<f32> {
        self.nodata
    }

    pub fn band(&self, name: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.name == name)
    }

    pub fn band_view(&self, name: &str) -> Option<BandView<'_>> {
        self.band(name).map(|b| BandView {
            width: self.width,
            height: self.height,
            data: &b.data,
            nodata: self.nodata,
        })
    }

    pub fn band_names(&self) -> Vec<&str> {
        self.bands.iter().map(|b| b.name.as_str()).collect()
    }

    /// World-space extent of the whole grid.
    pub fn extent(&self) -> BBox {
        let t = &self.transform;
        BBox::new(
            t.origin_x,
            t.origin_y,
            t.origin_x + self.width as f64 * t.pixel_size_x,
            t.origin_y + self.height as f64 * t.pixel_size_y,
        )
    }
}

pub const NON_WETLAND: u8 = 0;
pub const WETLAND: u8 = 1;
pub const MASK_NODATA: u8 = 255;

/// Binary wetland mask over {0, 1, 255}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(RasterError::BandLength {
                name: "mask".into(),
                len: values.len(),
                expected: width * height,
            });
        }
        if let Some((index, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !matches!(v, NON_WETLAND | WETLAND | MASK_NODATA))
        {
            return Err(RasterError::MaskValue { index, value: v as f32 });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("fill value must be 0, 1 or 255")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.values[row * self.width + col]
    }

    pub fn count(&self, value: u8) -> usize {
        self.values.iter().filter(|&&v| v == value).count()
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }
}
