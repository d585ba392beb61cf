//! Wetland polygons, their GeoJSON form and even-odd rasterization.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{GeoTransform, Mask, RasterError, Result, NON_WETLAND, WETLAND};
use crate::io::write_atomic;

pub type Ring = Vec<(f64, f64)>;

/// Exterior ring followed by zero or more holes. Rings are stored closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Ring>,
    pub label: String,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>, label: impl Into<String>) -> Self {
        let rings = std::iter::once(exterior).chain(holes).map(close_ring).collect();
        Self { rings, label: label.into() }
    }

    /// Axis-aligned rectangle `[x0, x1) × [y0, y1)`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64, label: impl Into<String>) -> Self {
        Self::new(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)], Vec::new(), label)
    }

    pub fn exterior(&self) -> &Ring {
        &self.rings[0]
    }

    pub fn holes(&self) -> &[Ring] {
        &self.rings[1..]
    }

    fn distinct_vertices(ring: &Ring) -> usize {
        let mut pts: Vec<(u64, u64)> = ring.iter().map(|&(x, y)| (x.to_bits(), y.to_bits())).collect();
        pts.sort_unstable();
        pts.dedup();
        pts.len()
    }

    fn y_range(&self) -> (f64, f64) {
        self.rings.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        })
    }

    /// Even-odd containment using the same crossing rule as rasterization.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut xs = Vec::new();
        self.crossings(y, &mut xs);
        xs.iter().filter(|&&c| c > x).count() % 2 == 1
    }

    /// Even-odd crossings of the horizontal line at `y`, unsorted.
    fn crossings(&self, y: f64, out: &mut Vec<f64>) {
        for ring in &self.rings {
            for edge in ring.windows(2) {
                let ((xi, yi), (xj, yj)) = (edge[0], edge[1]);
                if (yi > y) != (yj > y) {
                    out.push(xi + (y - yi) * (xj - xi) / (yj - yi));
                }
            }
        }
    }
}

fn close_ring(mut ring: Ring) -> Ring {
    if let (Some(&first), Some(&last)) = (ring.first(), ring.last()) {
        if first != last {
            ring.push(first);
        }
    }
    ring
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonSet {
    pub polygons: Vec<Polygon>,
}

impl PolygonSet {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        Self { polygons }
    }

    pub fn validate(&self) -> Result<()> {
        for (index, poly) in self.polygons.iter().enumerate() {
            for ring in &poly.rings {
                let distinct = Polygon::distinct_vertices(ring);
                if distinct < 3 {
                    return Err(RasterError::DegenerateRing { index, distinct });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }
}

/// Burns every polygon into a `width × height` mask.
///
/// A pixel is wetland iff its center is inside some polygon under the
/// even-odd rule over all of that polygon's rings, so holes subtract.
pub fn rasterize_polygons(
    polygons: &PolygonSet,
    width: usize,
    height: usize,
    transform: &GeoTransform,
) -> Result<Mask> {
    polygons.validate()?;
    let mut values = vec![NON_WETLAND; width * height];
    let ranges: Vec<(f64, f64)> = polygons.polygons.iter().map(Polygon::y_range).collect();
    let mut xs = Vec::new();
    for row in 0..height {
        let (_, cy) = transform.pixel_center(0, row);
        let line = &mut values[row * width..(row + 1) * width];
        for (poly, &(ylo, yhi)) in polygons.polygons.iter().zip(&ranges) {
            if cy < ylo || cy > yhi {
                continue;
            }
            xs.clear();
            poly.crossings(cy, &mut xs);
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            // A center is inside iff an odd number of crossings lie strictly
            // to its right.
            let mut k = 0;
            for (col, px) in line.iter_mut().enumerate() {
                let (cx, _) = transform.pixel_center(col, row);
                while k < xs.len() && xs[k] <= cx {
                    k += 1;
                }
                if (xs.len() - k) % 2 == 1 {
                    *px = WETLAND;
                }
            }
        }
    }
    Mask::new(width, height, values)
}

fn parse_ring(v: &Value) -> Result<Ring> {
    let arr = v.as_array().ok_or_else(|| RasterError::GeoJson("ring must be an array".into()))?;
    arr.iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?))) {
                Some(pt) => Ok(pt),
                None => Err(RasterError::GeoJson("position must hold two numbers".into())),
            }
        })
        .collect()
}

fn parse_polygon(rings: &Value, label: &str) -> Result<Polygon> {
    let rings = rings.as_array().ok_or_else(|| RasterError::GeoJson("polygon must be an array of rings".into()))?;
    let mut parsed = rings.iter().map(parse_ring).collect::<Result<Vec<_>>>()?;
    if parsed.is_empty() {
        return Err(RasterError::GeoJson("polygon without rings".into()));
    }
    let exterior = parsed.remove(0);
    Ok(Polygon::new(exterior, parsed, label))
}

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
pub fn polygons_from_geojson(text: &str) -> Result<PolygonSet> {
    let doc: Value = serde_json::from_str(text).map_err(|e| RasterError::GeoJson(e.to_string()))?;
    if doc["type"] != "FeatureCollection" {
        return Err(RasterError::GeoJson("expected a FeatureCollection".into()));
    }
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| RasterError::GeoJson("missing features array".into()))?;
    let mut polygons = Vec::new();
    for feature in features {
        let label = feature["properties"]["label"].as_str().unwrap_or("wetland");
        let geom = &feature["geometry"];
        match geom["type"].as_str() {
            Some("Polygon") => polygons.push(parse_polygon(&geom["coordinates"], label)?),
            Some("MultiPolygon") => {
                let parts = geom["coordinates"]
                    .as_array()
                    .ok_or_else(|| RasterError::GeoJson("MultiPolygon coordinates must be an array".into()))?;
                for part in parts {
                    polygons.push(parse_polygon(part, label)?);
                }
            }
            other => {
                return Err(RasterError::GeoJson(format!("unsupported geometry type {other:?}")));
            }
        }
    }
    let set = PolygonSet::new(polygons);
    set.validate()?;
    Ok(set)
}

pub fn polygons_to_geojson(polygons: &PolygonSet) -> String {
    let features: Vec<Value> = polygons
        .polygons
        .iter()
        .map(|p| {
            let rings: Vec<Value> = p
                .rings
                .iter()
                .map(|r| Value::Array(r.iter().map(|&(x, y)| json!([x, y])).collect()))
                .collect();
            json!({
                "type": "Feature",
                "properties": { "label": p.label },
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    serde_json::to_string(&json!({ "type": "FeatureCollection", "features": features }))
        .expect("geojson values always serialize")
}

pub fn read_polygons(path: &Path) -> Result<PolygonSet> {
    polygons_from_geojson(&fs::read_to_string(path)?)
}

pub fn write_polygons(polygons: &PolygonSet, path: &Path) -> Result<()> {
    write_atomic(path, polygons_to_geojson(polygons).as_bytes())?;
    Ok(())
}
