//! Pixel classifiers: trained networks over band and index features, and
//! rule baselines.

use serde::{Deserialize, Serialize};

use super::{Result, SvannError};
use crate::indices::{compute_index, IndexId};
use crate::network::Network;
use crate::raster::{Mask, Raster, MASK_NODATA, NON_WETLAND, WETLAND};
use crate::rules::{classify, RuleSet};

/// Anything that turns a raster into a wetland mask of the same shape.
pub trait PixelClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn predict_raster(&self, raster: &Raster) -> Result<Mask>;
}

/// Per-pixel input vector: raw bands in order, then indices in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub bands: Vec<String>,
    pub indices: Vec<IndexId>,
}

/// Row-major feature matrix with a validity flag per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FeatureMatrix {
    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.values[pixel * self.dim..(pixel + 1) * self.dim]
    }
}

impl FeatureSet {
    /// Red, Green, Blue followed by `indices`.
    pub fn rgb_plus(indices: &[IndexId]) -> Self {
        Self { bands: vec!["Red".into(), "Green".into(), "Blue".into()], indices: indices.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.bands.len() + self.indices.len()
    }

    /// Short label such as `NDVI` or `NDVI+NDWI`.
    pub fn label(&self) -> String {
        if self.indices.is_empty() {
            return "bands".into();
        }
        self.indices.iter().map(IndexId::name).collect::<Vec<_>>().join("+")
    }

    pub fn extract(&self, raster: &Raster) -> Result<FeatureMatrix> {
        let n = raster.len();
        let dim = self.dim();
        let sentinel = raster.nodata();
        let mut valid = vec![true; n];
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for name in &self.bands {
            let band = raster.band(name).ok_or_else(|| SvannError::Config(format!("raster has no `{name}` band")))?;
            for (v, &x) in valid.iter_mut().zip(&band.data) {
                if x.is_nan() || Some(x) == sentinel {
                    *v = false;
                }
            }
            columns.push(band.data.iter().map(|&x| x as f64).collect());
        }
        for id in &self.indices {
            let band = compute_index(raster, id)?;
            for (v, &nd) in valid.iter_mut().zip(&band.nodata) {
                if nd {
                    *v = false;
                }
            }
            columns.push(band.values);
        }
        let mut values = Vec::with_capacity(n * dim);
        for p in 0..n {
            values.extend(columns.iter().map(|c| c[p]));
        }
        Ok(FeatureMatrix { dim, values, valid })
    }
}

/// A network with a single sigmoid output thresholded into a label.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    pub features: FeatureSet,
    pub net: Network<f64>,
    pub threshold: f64,
}

impl NetworkModel {
    pub fn new(name: impl Into<String>, features: FeatureSet, net: Network<f64>) -> Result<Self> {
        let arch = net.architecture();
        if arch.inputs() != features.dim() || arch.outputs() != 1 {
            return Err(SvannError::Config(format!(
                "network maps {} inputs to {} outputs; features need {} inputs and one output",
                arch.inputs(),
                arch.outputs(),
                features.dim()
            )));
        }
        Ok(Self { name: name.into(), features, net, threshold: 0.5 })
    }
}

impl PixelClassifier for NetworkModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict_raster(&self, raster: &Raster) -> Result<Mask> {
        let fm = self.features.extract(raster)?;
        let mut out = Vec::with_capacity(raster.len());
        for p in 0..raster.len() {
            if !fm.valid[p] {
                out.push(MASK_NODATA);
                continue;
            }
            let y = self.net.predict(fm.row(p))?[0];
            out.push(if y >= self.threshold { WETLAND } else { NON_WETLAND });
        }
        Ok(Mask::new(raster.width(), raster.height(), out)?)
    }
}

/// Interpretable baseline: one index and its ruleset.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleModel {
    pub name: String,
    pub ruleset: RuleSet,
}

impl RuleModel {
    pub fn new(name: impl Into<String>, ruleset: RuleSet) -> Self {
        Self { name: name.into(), ruleset }
    }

    /// The builtin ruleset for `index`, named `rule:<INDEX>`.
    pub fn builtin(index: &IndexId) -> Result<Self> {
        let rs = RuleSet::default_for(index)
            .ok_or_else(|| SvannError::Config(format!("no builtin ruleset for {index}")))?;
        Ok(Self::new(format!("rule:{}", index.name()), rs))
    }
}

impl PixelClassifier for RuleModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict_raster(&self, raster: &Raster) -> Result<Mask> {
        let band = compute_index(raster, self.ruleset.index())?;
        Ok(classify(&band, &self.ruleset)?)
    }
}

/// Predicts one label everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantModel {
    pub name: String,
    pub label: u8,
}

impl PixelClassifier for ConstantModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict_raster(&self, raster: &Raster) -> Result<Mask> {
        Ok(Mask::filled(raster.width(), raster.height(), self.label))
    }
}
