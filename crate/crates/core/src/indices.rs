//! Normalized-difference remote sensing indices.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Band, BandView, GeoTransform, Raster, RasterError};

/// Sentinel written into SVR1 containers for flagged index pixels.
pub const INDEX_NODATA: f32 = -9999.0;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("band dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
    #[error("raster is missing band `{band}` required by {index}")]
    MissingBand { index: String, band: String },
    #[error("unknown index `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum IndexId {
    Ndvi,
    Ndwi,
    /// Any other registry entry, by name.
    Custom(String),
}

impl IndexId {
    pub fn name(&self) -> &str {
        match self {
            IndexId::Ndvi => "NDVI",
            IndexId::Ndwi => "NDWI",
            IndexId::Custom(name) => name,
        }
    }

    /// Case-insensitive name comparison.
    pub fn matches(&self, other: &IndexId) -> bool {
        self.name().eq_ignore_ascii_case(other.name())
    }
}

impl fmt::Display for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexId {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NDVI" => Ok(IndexId::Ndvi),
            "NDWI" => Ok(IndexId::Ndwi),
            "" => Err(IndexError::Unknown(s.to_string())),
            _ => Ok(IndexId::Custom(s.to_string())),
        }
    }
}

impl From<IndexId> for String {
    fn from(id: IndexId) -> String {
        id.name().to_string()
    }
}

impl TryFrom<String> for IndexId {
    type Error = IndexError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Per-pixel index values with a parallel nodata flag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBand {
    pub id: IndexId,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub nodata: Vec<bool>,
}

impl IndexBand {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_raster(&self, transform: GeoTransform) -> Result<Raster, IndexError> {
        let data = self
            .values
            .iter()
            .zip(&self.nodata)
            .map(|(&v, &nd)| if nd { INDEX_NODATA } else { v as f32 })
            .collect();
        Ok(Raster::new(
            self.width,
            self.height,
            vec![Band::new(self.id.name(), data)],
            transform,
            Some(INDEX_NODATA),
        )?)
    }

    /// Reads a single-band SVR1 index container; the band name is the id.
    pub fn from_raster(raster: &Raster) -> Result<Self, IndexError> {
        let band = raster
            .bands()
            .first()
            .ok_or_else(|| IndexError::MissingBand { index: "index".into(), band: "<any>".into() })?;
        let sentinel = raster.nodata();
        let nodata: Vec<bool> = band.data.iter().map(|&v| Some(v) == sentinel || v.is_nan()).collect();
        let values = band
            .data
            .iter()
            .zip(&nodata)
            .map(|(&v, &nd)| if nd { 0.0 } else { v as f64 })
            .collect();
        Ok(Self { id: band.name.parse()?, width: raster.width(), height: raster.height(), values, nodata })
    }
}

/// `(a - b) / (a + b)`, or `None` when the denominator vanishes.
#[inline]
pub fn nd_value<T: Float>(a: T, b: T) -> Option<T> {
    let den = a + b;
    if den == T::zero() {
        None
    } else {
        Some((a - b) / den)
    }
}

/// Pixelwise normalized difference of two bands.
///
/// Zero-denominator pixels and pixels holding either band's nodata
/// sentinel get value 0 with the nodata flag set.
pub fn normalized_difference(a: BandView<'_>, b: BandView<'_>) -> Result<IndexBand, IndexError> {
    if (a.width, a.height) != (b.width, b.height) || a.data.len() != b.data.len() {
        return Err(IndexError::Dimensions(a.width, a.height, b.width, b.height));
    }
    let is_nd = |v: f32, sentinel: Option<f32>| Some(v) == sentinel || v.is_nan();
    let mut values = Vec::with_capacity(a.data.len());
    let mut nodata = Vec::with_capacity(a.data.len());
    for (&x, &y) in a.data.iter().zip(b.data) {
        let v = if is_nd(x, a.nodata) || is_nd(y, b.nodata) {
            None
        } else {
            nd_value(x as f64, y as f64)
        };
        values.push(v.unwrap_or(0.0));
        nodata.push(v.is_none());
    }
    Ok(IndexBand { id: IndexId::Custom("ND".into()), width: a.width, height: a.height, values, nodata })
}

/// Name → (minuend band, subtrahend band) table for normalized differences.
#[derive(Debug, Clone)]
pub struct IndexRegistry {
    entries: Vec<(IndexId, String, String)>,
}

impl Default for IndexRegistry {
    fn default() -> Self {
        let mut reg = Self { entries: Vec::new() };
        reg.register(IndexId::Ndvi, "NIR", "Red");
        reg.register(IndexId::Ndwi, "Green", "NIR");
        reg.register(IndexId::Custom("NDMI".into()), "NIR", "SWIR1");
        reg
    }
}

impl IndexRegistry {
    /// Adds or replaces an index definition.
    pub fn register(&mut self, id: IndexId, a: impl Into<String>, b: impl Into<String>) {
        self.entries.retain(|(e, _, _)| !e.matches(&id));
        self.entries.push((id, a.into(), b.into()));
    }

    pub fn bands_for(&self, id: &IndexId) -> Option<(&str, &str)> {
        self.entries
            .iter()
            .find(|(e, _, _)| e.matches(id))
            .map(|(_, a, b)| (a.as_str(), b.as_str()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &IndexId> {
        self.entries.iter().map(|(id, _, _)| id)
    }

    pub fn compute(&self, raster: &Raster, id: &IndexId) -> Result<IndexBand, IndexError> {
        let (a, b) = self.bands_for(id).ok_or_else(|| IndexError::Unknown(id.to_string()))?;
        let view = |name: &str| {
            raster
                .band_view(name)
                .ok_or_else(|| IndexError::MissingBand { index: id.to_string(), band: name.to_string() })
        };
        let mut band = normalized_difference(view(a)?, view(b)?)?;
        band.id = id.clone();
        Ok(band)
    }
}

/// Computes a built-in index: NDVI = ND(NIR, Red), NDWI = ND(Green, NIR).
pub fn compute_index(raster: &Raster, id: &IndexId) -> Result<IndexBand, IndexError> {
    IndexRegistry::default().compute(raster, id)
}
