//! Per-zone data splits and zonal model training.

use serde::{Deserialize, Serialize};

use super::{assign_zones, FeatureSet, Mode, NetworkModel, RegistryEntry, Result, SvannError, ZonalRegistry, Zone};
use crate::network::{self, init_network, Activation, Architecture, Dataset, InitScheme, Loss, Optimizer, TrainConfig};
use crate::raster::{Split, SplitFractions, TileSet, MASK_NODATA, WETLAND};
use crate::rng::{shuffle, stream_seed, SplitMix64};

/// Tile indices of one zone, by split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ZoneTiles {
    pub id: String,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl ZoneTiles {
    pub fn of(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// A tiled scene split separately inside each zone.
#[derive(Debug, Clone)]
pub struct ZonedData {
    pub tiles: TileSet,
    pub zones: Vec<ZoneTiles>,
    pub unassigned: Vec<usize>,
}

impl ZonedData {
    pub fn zone(&self, id: &str) -> Option<&ZoneTiles> {
        self.zones.iter().find(|z| z.id == id)
    }

    pub fn zone_ids(&self) -> Vec<&str> {
        self.zones.iter().map(|z| z.id.as_str()).collect()
    }

    /// Tiles of `zone` in `split`; `None` pools every zone.
    pub fn tiles_in(&self, zone: Option<&str>, split: Split) -> Result<Vec<usize>> {
        match zone {
            Some(id) => {
                Ok(self.zone(id).ok_or_else(|| SvannError::UnknownZone(id.to_string()))?.of(split).to_vec())
            }
            None => Ok(self.zones.iter().flat_map(|z| z.of(split).iter().copied()).collect()),
        }
    }
}

/// Assigns tiles to zones, then splits each zone's tiles with its own
/// seed stream so that every zone contributes to train, val and test.
/// Unassigned tiles are recorded but belong to no split.
pub fn split_by_zone(tiles: TileSet, zones: &[Zone], fractions: SplitFractions, seed: u64) -> Result<ZonedData> {
    let assignment = assign_zones(&tiles, zones)?;
    let mut out = Vec::with_capacity(zones.len());
    for (z, (id, members)) in assignment.zones.iter().enumerate() {
        let (sub, _) = crate::raster::split_dataset(tiles.subset(members), fractions, stream_seed(seed, z as u64))?;
        let mut zt = ZoneTiles { id: id.clone(), ..ZoneTiles::default() };
        for (k, &global) in members.iter().enumerate() {
            match sub.split_of(k).unwrap_or(Split::Train) {
                Split::Train => zt.train.push(global),
                Split::Val => zt.val.push(global),
                Split::Test => zt.test.push(global),
            }
        }
        out.push(zt);
    }
    Ok(ZonedData { tiles, zones: out, unassigned: assignment.unassigned })
}

/// Labelled pixels of `tiles`, skipping nodata in features or truth.
/// When more than `max_pixels` qualify (and `max_pixels > 0`), a seeded
/// subsample is kept.
pub fn pixel_dataset(
    set: &TileSet,
    tiles: &[usize],
    features: &FeatureSet,
    max_pixels: usize,
    seed: u64,
) -> Result<Dataset<f64>> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &t in tiles {
        let tile = &set.tiles[t];
        let fm = features.extract(&tile.raster)?;
        for (p, &label) in tile.mask.values().iter().enumerate() {
            if label == MASK_NODATA || !fm.valid[p] {
                continue;
            }
            x.push(fm.row(p).to_vec());
            y.push(vec![if label == WETLAND { 1.0 } else { 0.0 }]);
        }
    }
    if max_pixels > 0 && x.len() > max_pixels {
        let mut order: Vec<usize> = (0..x.len()).collect();
        shuffle(&mut SplitMix64::new(seed), &mut order);
        order.truncate(max_pixels);
        order.sort_unstable();
        x = order.iter().map(|&i| std::mem::take(&mut x[i])).collect();
        y = order.iter().map(|&i| std::mem::take(&mut y[i])).collect();
    }
    Ok(Dataset::new(x, y))
}

/// One model to train; `zone: None` serves every zone (OSFA).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub zone: Option<String>,
    pub features: FeatureSet,
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Zero means full batch.
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub hidden_activation: Activation,
    /// Training pixels kept per model; zero keeps all.
    pub max_pixels: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 0.01,
            batch_size: 32,
            optimizer: Optimizer::adam(),
            hidden_activation: Activation::Tanh,
            max_pixels: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalSpec {
    pub mode: Mode,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub settings: TrainSettings,
}

fn architecture(spec: &ModelSpec, settings: &TrainSettings) -> Result<Architecture> {
    let mut sizes = vec![spec.features.dim()];
    sizes.extend(&spec.hidden);
    sizes.push(1);
    let mut acts = vec![settings.hidden_activation; spec.hidden.len()];
    acts.push(Activation::Sigmoid);
    Ok(Architecture::new(sizes, acts)?)
}

/// Trains every model of `spec` on its zone's training tiles (all zones
/// pooled for a zone-less model) with binary cross-entropy. Models train
/// concurrently; each uses its own seed stream, so results do not depend
/// on scheduling.
pub fn train_zonal(data: &ZonedData, spec: &ZonalSpec, seed: u64) -> Result<ZonalRegistry> {
    let settings = &spec.settings;
    let mut initial = Vec::with_capacity(spec.models.len());
    for (i, m) in spec.models.iter().enumerate() {
        if let Some(z) = &m.zone {
            if data.zone(z).is_none() {
                return Err(SvannError::UnknownZone(z.clone()));
            }
        }
        let arch = architecture(m, settings)?;
        let net = init_network::<f64>(&arch, InitScheme::Glorot, stream_seed(seed, 2 * i as u64))?.with_biases(true);
        let model = NetworkModel::new(m.name.clone(), m.features.clone(), net)?;
        initial.push(RegistryEntry { zone: m.zone.clone(), model });
    }
    // Validates the mode constraints before any training happens.
    let untrained = ZonalRegistry::new(spec.mode, initial)?;
    let cfg_for = |i: usize| TrainConfig::<f64> {
        learning_rate: settings.learning_rate,
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        loss: Loss::BinaryCrossEntropy,
        optimizer: settings.optimizer,
        seed: stream_seed(seed, 2 * i as u64 + 1),
    };
    let results: Vec<Result<RegistryEntry>> = std::thread::scope(|s| {
        let handles: Vec<_> = untrained
            .entries()
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                let cfg = cfg_for(i);
                s.spawn(move || -> Result<RegistryEntry> {
                    let tiles = data.tiles_in(entry.zone.as_deref(), Split::Train)?;
                    let ds = pixel_dataset(&data.tiles, &tiles, &entry.model.features, settings.max_pixels, cfg.seed)?;
                    if ds.is_empty() {
                        return Err(SvannError::EmptyZone(entry.zone.clone().unwrap_or_else(|| "*".into())));
                    }
                    let (net, _) = network::train(&entry.model.net, &ds, &cfg)?;
                    let model = NetworkModel { net, ..entry.model.clone() };
                    Ok(RegistryEntry { zone: entry.zone.clone(), model })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    ZonalRegistry::new(spec.mode, results.into_iter().collect::<Result<Vec<_>>>()?)
}
