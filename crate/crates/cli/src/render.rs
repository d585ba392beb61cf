//! Grayscale PNG rendering of wetland masks.

use std::io::Cursor;
use std::path::Path;

use anyhow::{Context, Result};
use image::{GrayImage, ImageFormat, Luma};
use svann_core::io::write_atomic;
use svann_core::raster::{Mask, MASK_NODATA, WETLAND};

pub const PNG_WETLAND: u8 = 255;
pub const PNG_NON_WETLAND: u8 = 0;
pub const PNG_NODATA: u8 = 128;

pub fn mask_to_image(mask: &Mask) -> GrayImage {
    let w = mask.width() as u32;
    GrayImage::from_fn(w, mask.height() as u32, |x, y| {
        Luma([match mask.get(x as usize, y as usize) {
            WETLAND => PNG_WETLAND,
            MASK_NODATA => PNG_NODATA,
            _ => PNG_NON_WETLAND,
        }])
    })
}

/// PNG-encoded mask bytes; wetland 255, non-wetland 0, nodata 128.
pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    mask_to_image(mask).write_to(&mut out, ImageFormat::Png).context("encoding PNG")?;
    Ok(out.into_inner())
}

pub fn render_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let bytes = encode_mask_png(mask)?;
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}
