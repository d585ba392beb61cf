//! Interval rule classifiers over a single index: the interpretable
//! one-size-fits-all baselines.
//!
//! Intervals are half-open `[lo, hi)` except the last, which is closed at
//! its upper bound, so touching boundaries resolve upward.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indices::{IndexBand, IndexId};
use crate::raster::{Mask, RasterError, MASK_NODATA};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("invalid ruleset: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("ruleset is for {ruleset} but the band holds {band}")]
    IndexMismatch { ruleset: String, band: String },
    #[error("value {value} at pixel {index} lies outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("unknown builtin ruleset `{0}`")]
    UnknownBuiltin(String),
    #[error("ruleset json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleSetDoc", into = "RuleSetDoc")]
pub struct RuleSet {
    index: IndexId,
    intervals: Vec<Interval>,
    binary: BTreeMap<String, u8>,
}

/// Wire form; validated on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleSetDoc {
    index: IndexId,
    intervals: Vec<Interval>,
    binary: BTreeMap<String, u8>,
}

impl TryFrom<RuleSetDoc> for RuleSet {
    type Error = RuleError;

    fn try_from(doc: RuleSetDoc) -> Result<Self, RuleError> {
        RuleSet::new(doc.index, doc.intervals, doc.binary)
    }
}

impl From<RuleSet> for RuleSetDoc {
    fn from(r: RuleSet) -> Self {
        RuleSetDoc { index: r.index, intervals: r.intervals, binary: r.binary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    NdviDefault,
    NdwiDefault,
}

impl std::str::FromStr for Builtin {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, RuleError> {
        match s.to_ascii_lowercase().as_str() {
            "ndvi_default" | "ndvi" => Ok(Builtin::NdviDefault),
            "ndwi_default" | "ndwi" => Ok(Builtin::NdwiDefault),
            _ => Err(RuleError::UnknownBuiltin(s.to_string())),
        }
    }
}

impl RuleSet {
    pub fn new(index: IndexId, intervals: Vec<Interval>, binary: BTreeMap<String, u8>) -> Result<Self, RuleError> {
        let rs = Self { index, intervals, binary };
        rs.validate()?;
        Ok(rs)
    }

    fn validate(&self) -> Result<(), RuleError> {
        let mut problems = Vec::new();
        let iv = &self.intervals;
        if iv.is_empty() {
            problems.push("no intervals".to_string());
        }
        for (i, r) in iv.iter().enumerate() {
            if !(r.lo < r.hi) {
                problems.push(format!("interval {i} ({}, {}) has lo >= hi", r.lo, r.hi));
            }
            match self.binary.get(&r.label) {
                None => problems.push(format!("label `{}` missing from binary map", r.label)),
                Some(v) if *v > 1 => problems.push(format!("label `{}` maps to {v}, expected 0 or 1", r.label)),
                _ => {}
            }
        }
        for (i, pair) in iv.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if b.lo < a.hi {
                problems.push(format!("intervals {i} ({}, {}) and {} ({}, {}) overlap", a.lo, a.hi, i + 1, b.lo, b.hi));
            } else if b.lo > a.hi {
                problems.push(format!("gap between intervals {i} ({}, {}) and {} ({}, {})", a.lo, a.hi, i + 1, b.lo, b.hi));
            }
        }
        if let (Some(first), Some(last)) = (iv.first(), iv.last()) {
            if first.lo != -1.0 {
                problems.push(format!("first interval starts at {}, expected -1", first.lo));
            }
            if last.hi != 1.0 {
                problems.push(format!("last interval ends at {}, expected 1", last.hi));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(RuleError::Invalid(problems))
        }
    }

    pub fn builtin(which: Builtin) -> Self {
        let iv = |lo, hi, label: &str| Interval { lo, hi, label: label.to_string() };
        let (index, intervals, binary): (IndexId, Vec<Interval>, &[(&str, u8)]) = match which {
            Builtin::NdviDefault => (
                IndexId::Ndvi,
                vec![
                    iv(-1.0, -0.1, "Water"),
                    iv(-0.1, 0.1, "Rocks, clouds, buildings, etc"),
                    iv(0.1, 0.73, "Sparse Wetland Vegetation"),
                    iv(0.73, 1.0, "Dense Non-Wetland Vegetation"),
                ],
                &[
                    ("Water", 0),
                    ("Rocks, clouds, buildings, etc", 0),
                    ("Sparse Wetland Vegetation", 1),
                    ("Dense Non-Wetland Vegetation", 0),
                ],
            ),
            Builtin::NdwiDefault => (
                IndexId::Ndwi,
                vec![iv(-1.0, -0.6, "Non-Wetland"), iv(-0.6, 1.0, "Wetland")],
                &[("Non-Wetland", 0), ("Wetland", 1)],
            ),
        };
        let binary = binary.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::new(index, intervals, binary).expect("builtin rulesets are valid")
    }

    /// The default ruleset for a built-in index, if one exists.
    pub fn default_for(index: &IndexId) -> Option<Self> {
        match index {
            IndexId::Ndvi => Some(Self::builtin(Builtin::NdviDefault)),
            IndexId::Ndwi => Some(Self::builtin(Builtin::NdwiDefault)),
            IndexId::Custom(_) => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rulesets always serialize")
    }

    pub fn index(&self) -> &IndexId {
        &self.index
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Interval boundaries in ascending order, including both ends.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.intervals.iter().map(|i| i.lo).collect();
        if let Some(last) = self.intervals.last() {
            b.push(last.hi);
        }
        b
    }

    /// Interval containing `value`, or `None` outside `[-1, 1]`.
    pub fn interval_of(&self, value: f64) -> Option<&Interval> {
        let last = self.intervals.len() - 1;
        self.intervals
            .iter()
            .enumerate()
            .find(|(i, r)| value >= r.lo && (value < r.hi || (*i == last && value <= r.hi)))
            .map(|(_, r)| r)
    }

    pub fn label_of(&self, value: f64) -> Option<&str> {
        self.interval_of(value).map(|r| r.label.as_str())
    }

    /// Binary wetland value for one index value.
    pub fn classify_value(&self, value: f64) -> Option<u8> {
        self.interval_of(value).map(|r| self.binary[&r.label])
    }
}

pub fn builtin_ruleset(which: Builtin) -> RuleSet {
    RuleSet::builtin(which)
}

pub fn load_ruleset(path: &Path) -> Result<RuleSet, RuleError> {
    RuleSet::from_json(&fs::read_to_string(path)?)
}

/// Applies a ruleset pixelwise; nodata pixels become 255.
pub fn classify(band: &IndexBand, ruleset: &RuleSet) -> Result<Mask, RuleError> {
    if !band.id.matches(ruleset.index()) {
        return Err(RuleError::IndexMismatch {
            ruleset: ruleset.index().to_string(),
            band: band.id.to_string(),
        });
    }
    let mut out = Vec::with_capacity(band.len());
    for (index, (&v, &nd)) in band.values.iter().zip(&band.nodata).enumerate() {
        if nd {
            out.push(MASK_NODATA);
            continue;
        }
        out.push(ruleset.classify_value(v).ok_or(RuleError::OutOfRange { index, value: v })?);
    }
    Ok(Mask::new(band.width, band.height, out)?)
}
