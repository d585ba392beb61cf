//! Evaluation, validation-based selection and agreement with rule models.

use std::fmt::Write as _;

use super::{NetworkModel, PixelClassifier, Result, SvannError, ZonalRegistry, Zone, ZonedData};
use crate::metrics::{confusion, csv_field, ConfusionMatrix, MetricRow, MetricsError};
use crate::raster::{Mask, Raster, Split, MASK_NODATA};

/// Zone name used for rows pooled over every zone.
pub const ALL_ZONES: &str = "ALL";

fn zone_predictions(model: &dyn PixelClassifier, data: &ZonedData, tiles: &[usize]) -> Result<Vec<Mask>> {
    tiles.iter().map(|&t| model.predict_raster(&data.tiles.tiles[t].raster)).collect()
}

/// Confusion-matrix rows for every model in every zone over the tiles of
/// `split`, followed by a pooled `ALL` row per model.
pub fn evaluate(models: &[&dyn PixelClassifier], data: &ZonedData, split: Split) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for model in models {
        let mut pooled = ConfusionMatrix::default();
        for zone in &data.zones {
            let mut cm = ConfusionMatrix::default();
            for &t in zone.of(split) {
                let pred = model.predict_raster(&data.tiles.tiles[t].raster)?;
                cm += confusion(&pred, &data.tiles.tiles[t].mask)?;
            }
            pooled += cm;
            rows.push(MetricRow::new(model.name(), zone.id.clone(), cm));
        }
        rows.push(MetricRow::new(model.name(), ALL_ZONES, pooled));
    }
    Ok(rows)
}

fn find<'a>(rows: &'a [MetricRow], model: &str, zone: &str) -> Option<&'a MetricRow> {
    rows.iter().find(|r| r.model == model && r.zone == zone)
}

/// The model chosen for each zone, in zone order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub choices: Vec<(String, String)>,
}

impl Selection {
    pub fn model_for(&self, zone: &str) -> Option<&str> {
        self.choices.iter().find(|(z, _)| z == zone).map(|(_, m)| m.as_str())
    }

    /// Combines the chosen models into one classifier routed by zone.
    pub fn predictor(&self, registry: &ZonalRegistry, zones: &[Zone], name: impl Into<String>) -> Result<ZonalPredictor> {
        let mut routes = Vec::with_capacity(self.choices.len());
        for (zone, model) in &self.choices {
            let z = zones.iter().find(|z| &z.id == zone).ok_or_else(|| SvannError::UnknownZone(zone.clone()))?;
            let m = registry
                .model(model)
                .ok_or_else(|| SvannError::Registry(format!("selected model `{model}` is not registered")))?;
            routes.push((z.clone(), m.clone()));
        }
        Ok(ZonalPredictor { name: name.into(), routes })
    }
}

/// Per zone, the candidate with the highest validation F1. Ties go to the
/// candidate listed first in the registry.
pub fn select_best(registry: &ZonalRegistry, validation: &[MetricRow], zones: &[&str]) -> Result<Selection> {
    let mut choices = Vec::with_capacity(zones.len());
    for &zone in zones {
        let mut best: Option<(&str, f64)> = None;
        for m in registry.candidates(zone) {
            let row = find(validation, &m.name, zone)
                .ok_or_else(|| SvannError::MissingMetric { model: m.name.clone(), zone: zone.to_string() })?;
            let f1 = row.summary.f1;
            if best.is_none_or(|(_, b)| f1 > b) {
                best = Some((&m.name, f1));
            }
        }
        let (name, _) = best.ok_or_else(|| SvannError::Registry(format!("no candidate serves zone `{zone}`")))?;
        choices.push((zone.to_string(), name.to_string()));
    }
    Ok(Selection { choices })
}

/// Routes each pixel to the model of the zone containing its center.
/// Pixels outside every zone are nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalPredictor {
    pub name: String,
    pub routes: Vec<(Zone, NetworkModel)>,
}

impl PixelClassifier for ZonalPredictor {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict_raster(&self, raster: &Raster) -> Result<Mask> {
        let (w, h) = (raster.width(), raster.height());
        let t = *raster.transform();
        let owner: Vec<Option<usize>> = (0..w * h)
            .map(|p| {
                let (x, y) = t.pixel_center(p % w, p / w);
                self.routes.iter().position(|(z, _)| z.contains(x, y))
            })
            .collect();
        let mut out = vec![MASK_NODATA; w * h];
        for (k, (_, model)) in self.routes.iter().enumerate() {
            if !owner.contains(&Some(k)) {
                continue;
            }
            let pred = model.predict_raster(raster)?;
            for (p, o) in owner.iter().enumerate() {
                if *o == Some(k) {
                    out[p] = pred.values()[p];
                }
            }
        }
        Ok(Mask::new(w, h, out)?)
    }
}

/// Pixels where both masks carry a label, and how many of those agree.
pub fn agreement_counts(a: &Mask, b: &Mask) -> Result<(u64, u64)> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::Dimensions(a.width(), a.height(), b.width(), b.height()).into());
    }
    let (mut agree, mut total) = (0u64, 0u64);
    for (&p, &q) in a.values().iter().zip(b.values()) {
        if p == MASK_NODATA || q == MASK_NODATA {
            continue;
        }
        total += 1;
        agree += u64::from(p == q);
    }
    Ok((agree, total))
}

/// Fraction of commonly labelled pixels with equal labels; 1.0 when no
/// pixel is labelled in both.
pub fn agreement_rate(a: &Mask, b: &Mask) -> Result<f64> {
    let (agree, total) = agreement_counts(a, b)?;
    Ok(if total == 0 { 1.0 } else { agree as f64 / total as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementEntry {
    pub black_box: String,
    pub zone: String,
    pub interpretable: String,
    pub agreement: f64,
    pub f1_black_box: f64,
    pub f1_interpretable: f64,
    pub f1_gap: f64,
    /// 1 is the interpretable model most similar to the black box in this zone.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeReport {
    pub metrics: Vec<MetricRow>,
    pub entries: Vec<AgreementEntry>,
}

pub const AGREEMENT_CSV_HEADER: &str = "black_box,zone,interpretable,agreement,f1_black_box,f1_interpretable,f1_gap,rank";

impl ComparativeReport {
    pub fn rank1(&self, black_box: &str, zone: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.black_box == black_box && e.zone == zone && e.rank == 1)
            .map(|e| e.interpretable.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(AGREEMENT_CSV_HEADER);
        out.push_str("\r\n");
        for e in &self.entries {
            let _ = write!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{}\r\n",
                csv_field(&e.black_box),
                csv_field(&e.zone),
                csv_field(&e.interpretable),
                e.agreement,
                e.f1_black_box,
                e.f1_interpretable,
                e.f1_gap,
                e.rank
            );
        }
        out
    }

    /// One line per black box and zone naming the rank-1 interpretable model.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for e in self.entries.iter().filter(|e| e.rank == 1) {
            let _ = writeln!(
                out,
                "{} in zone {}: closest interpretable model is {} (agreement {:.4}, F1 gap {:.4})",
                e.black_box, e.zone, e.interpretable, e.agreement, e.f1_gap
            );
        }
        out
    }
}

/// Compares every black box with every interpretable model inside each
/// zone on the tiles of `split`. Within a black box and zone, entries are
/// ranked by agreement (descending), then by absolute F1 gap, then by the
/// order of `interpretable`.
pub fn compare_report(
    black_boxes: &[&dyn PixelClassifier],
    interpretable: &[&dyn PixelClassifier],
    data: &ZonedData,
    split: Split,
) -> Result<ComparativeReport> {
    let all: Vec<&dyn PixelClassifier> = black_boxes.iter().chain(interpretable).copied().collect();
    let metrics = evaluate(&all, data, split)?;
    let f1 = |model: &str, zone: &str| find(&metrics, model, zone).map_or(0.0, |r| r.summary.f1);
    let mut entries = Vec::new();
    for zone in &data.zones {
        let tiles = zone.of(split);
        let interp_preds: Vec<Vec<Mask>> =
            interpretable.iter().map(|m| zone_predictions(*m, data, tiles)).collect::<Result<_>>()?;
        for bb in black_boxes {
            let bb_preds = zone_predictions(*bb, data, tiles)?;
            let mut group: Vec<AgreementEntry> = Vec::with_capacity(interpretable.len());
            for (im, preds) in interpretable.iter().zip(&interp_preds) {
                let (mut agree, mut total) = (0, 0);
                for (a, b) in bb_preds.iter().zip(preds) {
                    let (g, n) = agreement_counts(a, b)?;
                    agree += g;
                    total += n;
                }
                let (fb, fi) = (f1(bb.name(), &zone.id), f1(im.name(), &zone.id));
                group.push(AgreementEntry {
                    black_box: bb.name().to_string(),
                    zone: zone.id.clone(),
                    interpretable: im.name().to_string(),
                    agreement: if total == 0 { 1.0 } else { agree as f64 / total as f64 },
                    f1_black_box: fb,
                    f1_interpretable: fi,
                    f1_gap: (fb - fi).abs(),
                    rank: 0,
                });
            }
            // Stable sort keeps listed order as the final tie-break.
            group.sort_by(|a, b| b.agreement.total_cmp(&a.agreement).then(a.f1_gap.total_cmp(&b.f1_gap)));
            for (k, e) in group.iter_mut().enumerate() {
                e.rank = k + 1;
            }
            entries.extend(group);
        }
    }
    Ok(ComparativeReport { metrics, entries })
}
