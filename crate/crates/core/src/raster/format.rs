//! SVR1 container: `b"SVRASTER\n"`, a u32 little-endian header length, a
//! UTF-8 JSON header, then one binary32 little-endian row-major payload per
//! band in declared order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Band, GeoTransform, Mask, Raster, RasterError, Result};
use crate::io::write_atomic;

pub const MAGIC: &[u8; 9] = b"SVRASTER\n";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    width: usize,
    height: usize,
    bands: Vec<String>,
    transform: [f64; 4],
    nodata: Option<f64>,
}

pub fn write_raster_to<W: Write>(raster: &Raster, mut out: W) -> Result<()> {
    let header = Header {
        width: raster.width(),
        height: raster.height(),
        bands: raster.bands().iter().map(|b| b.name.clone()).collect(),
        transform: raster.transform().to_array(),
        nodata: raster.nodata().map(f64::from),
    };
    let json = serde_json::to_vec(&header).map_err(|e| RasterError::Header(e.to_string()))?;
    let len = u32::try_from(json.len()).map_err(|_| RasterError::Header("header too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(raster.len() * 4);
    for band in raster.bands() {
        buf.clear();
        for v in &band.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_raster(raster: &Raster, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(64 + raster.len() * 4 * raster.bands().len());
    write_raster_to(raster, &mut bytes)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn read_raster_from(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(RasterError::BadMagic);
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 4 {
        return Err(RasterError::TruncatedHeader { needed: 4, found: rest.len() });
    }
    let header_len = u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
    let rest = &rest[4..];
    if rest.len() < header_len {
        return Err(RasterError::TruncatedHeader { needed: header_len, found: rest.len() });
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| RasterError::Header(e.to_string()))?;
    let payload = &rest[header_len..];
    let band_len = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| RasterError::Header("dimensions overflow".into()))?;
    let expected = band_len * header.bands.len();
    if payload.len() < expected {
        return Err(RasterError::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(RasterError::LengthMismatch { expected, found: payload.len() });
    }
    let bands = header
        .bands
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let data = payload[i * band_len..(i + 1) * band_len]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Band { name, data }
        })
        .collect();
    let [ox, oy, psx, psy] = header.transform;
    Raster::new(
        header.width,
        header.height,
        bands,
        GeoTransform::new(ox, oy, psx, psy),
        header.nodata.map(|v| v as f32),
    )
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_raster_from(&bytes)
}

pub(crate) fn mask_to_raster(mask: &Mask, transform: GeoTransform) -> Raster {
    let data = mask.values().iter().map(|&v| v as f32).collect();
    Raster::new(mask.width(), mask.height(), vec![Band::new("mask", data)], transform, Some(255.0))
        .expect("mask shape is always consistent")
}

pub(crate) fn raster_to_mask(raster: &Raster) -> Result<Mask> {
    if raster.bands().len() != 1 {
        return Err(RasterError::MaskBands(raster.bands().len()));
    }
    let data = &raster.bands()[0].data;
    let mut values = Vec::with_capacity(data.len());
    for (index, &v) in data.iter().enumerate() {
        let b = match v {
            0.0 => 0,
            1.0 => 1,
            255.0 => 255,
            _ => return Err(RasterError::MaskValue { index, value: v }),
        };
        values.push(b);
    }
    Mask::new(raster.width(), raster.height(), values)
}

pub fn write_mask(mask: &Mask, transform: GeoTransform, path: &Path) -> Result<()> {
    write_raster(&mask_to_raster(mask, transform), path)
}

pub fn read_mask(path: &Path) -> Result<(Mask, GeoTransform)> {
    let raster = read_raster(path)?;
    let mask = raster_to_mask(&raster)?;
    Ok((mask, *raster.transform()))
}
