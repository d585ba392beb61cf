use super::{BBox, Band, GeoTransform, Mask, Raster, RasterError, Result};

/// Copies the pixels overlapping `bbox` into a new raster.
///
/// The window is snapped outward to whole pixels; the new origin is the
/// world position of the first kept pixel, which equals the bbox corner
/// whenever the bbox is pixel aligned. Values are copied, never resampled.
pub fn crop(raster: &Raster, bbox: &BBox) -> Result<Raster> {
    let t = raster.transform();
    let span = |lo: f64, hi: f64, origin: f64, size: f64, n: usize| -> (usize, usize) {
        let start = ((lo - origin) / size).floor().max(0.0);
        let end = ((hi - origin) / size).ceil().min(n as f64);
        let start = start.min(n as f64) as usize;
        let end = end.max(0.0) as usize;
        (start, end)
    };
    let (c0, c1) = span(bbox.min_x, bbox.max_x, t.origin_x, t.pixel_size_x, raster.width());
    let (r0, r1) = span(bbox.min_y, bbox.max_y, t.origin_y, t.pixel_size_y, raster.height());
    if c1 <= c0 || r1 <= r0 {
        return Err(RasterError::EmptyIntersection);
    }
    let (w, h) = (c1 - c0, r1 - r0);
    let bands = raster
        .bands()
        .iter()
        .map(|band| {
            let mut data = Vec::with_capacity(w * h);
            for row in r0..r1 {
                let start = row * raster.width() + c0;
                data.extend_from_slice(&band.data[start..start + w]);
            }
            Band::new(band.name.clone(), data)
        })
        .collect();
    let transform = GeoTransform::new(
        t.origin_x + c0 as f64 * t.pixel_size_x,
        t.origin_y + r0 as f64 * t.pixel_size_y,
        t.pixel_size_x,
        t.pixel_size_y,
    );
    Raster::new(w, h, bands, transform, raster.nodata())
}

/// Sample positions and weights along one axis for the pixel-center
/// convention: output index `i` reads input position `(i + 0.5)/factor - 0.5`,
/// clamped to `[0, n - 1]`.
fn axis_taps(n: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    let last = n.saturating_sub(1) as f64;
    (0..n * factor)
        .map(|i| {
            let pos = ((i as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, last);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Bilinear upsampling by an integer `factor` with border clamping.
///
/// Output pixels touching a nodata input inherit the nodata sentinel.
pub fn bilinear_upsample(raster: &Raster, factor: usize) -> Result<Raster> {
    if factor == 0 {
        return Err(RasterError::ZeroFactor);
    }
    let (w, h) = (raster.width(), raster.height());
    let t = raster.transform();
    let transform = GeoTransform::new(
        t.origin_x,
        t.origin_y,
        t.pixel_size_x / factor as f64,
        t.pixel_size_y / factor as f64,
    );
    if w == 0 || h == 0 {
        let bands = raster.bands().iter().map(|b| Band::new(b.name.clone(), Vec::new())).collect();
        return Raster::new(0, 0, bands, transform, raster.nodata());
    }
    let xs = axis_taps(w, factor);
    let ys = axis_taps(h, factor);
    let nodata = raster.nodata();
    let bands = raster
        .bands()
        .iter()
        .map(|band| {
            let src = &band.data;
            let mut data = Vec::with_capacity(xs.len() * ys.len());
            for &(y0, y1, fy) in &ys {
                for &(x0, x1, fx) in &xs {
                    let q = [
                        src[y0 * w + x0],
                        src[y0 * w + x1],
                        src[y1 * w + x0],
                        src[y1 * w + x1],
                    ];
                    if let Some(nd) = nodata {
                        if q.contains(&nd) {
                            data.push(nd);
                            continue;
                        }
                    }
                    let top = lerp(q[0] as f64, q[1] as f64, fx);
                    let bottom = lerp(q[2] as f64, q[3] as f64, fx);
                    data.push(lerp(top, bottom, fy) as f32);
                }
            }
            Band::new(band.name.clone(), data)
        })
        .collect();
    Raster::new(w * factor, h * factor, bands, transform, nodata)
}

/// Nearest-neighbour upsampling of a label mask: each pixel becomes a
/// `factor × factor` block.
pub fn upsample_mask(mask: &Mask, factor: usize) -> Result<Mask> {
    if factor == 0 {
        return Err(RasterError::ZeroFactor);
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::with_capacity(w * h * factor * factor);
    for row in 0..h * factor {
        for col in 0..w * factor {
            out.push(mask.get(col / factor, row / factor));
        }
    }
    Mask::new(w * factor, h * factor, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, psx: f64) -> Raster {
        let data = (0..w * h).map(|i| i as f32).collect();
        Raster::new(w, h, vec![Band::new("v", data)], GeoTransform::new(0.0, 0.0, psx, psx), None).unwrap()
    }

    #[test]
    fn crop_full_extent_is_identity() {
        let r = grid(10, 10, 1.0);
        assert_eq!(crop(&r, &r.extent()).unwrap(), r);
    }

    #[test]
    fn crop_left_half() {
        let r = grid(10, 10, 1.0);
        let c = crop(&r, &BBox::new(0.0, 0.0, 5.0, 10.0)).unwrap();
        assert_eq!((c.width(), c.height()), (5, 10));
        assert_eq!(c.bands()[0].data[..5], [0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.bands()[0].data[5], 10.0);
    }

    #[test]
    fn crop_shifts_origin() {
        let r = grid(40, 4, 30.0);
        let c = crop(&r, &BBox::new(300.0, 0.0, 600.0, 120.0)).unwrap();
        assert_eq!(c.transform().origin_x, 300.0);
        assert_eq!(c.width(), 10);
        assert_eq!(c.bands()[0].data[0], 10.0);
    }

    #[test]
    fn crop_outside_is_an_error() {
        let r = grid(4, 4, 1.0);
        assert!(matches!(crop(&r, &BBox::new(10.0, 10.0, 20.0, 20.0)), Err(RasterError::EmptyIntersection)));
    }

    #[test]
    fn upsample_pixel_center_convention() {
        let r = Raster::new(2, 1, vec![Band::new("v", vec![0.0, 1.0])], GeoTransform::unit(), None).unwrap();
        let u = bilinear_upsample(&r, 2).unwrap();
        assert_eq!((u.width(), u.height()), (4, 2));
        assert_eq!(u.bands()[0].data[..4], [0.0, 0.25, 0.75, 1.0]);
        assert_eq!(u.bands()[0].data[4..], [0.0, 0.25, 0.75, 1.0]);
        assert_eq!(u.transform().pixel_size_x, 0.5);
    }

    #[test]
    fn upsample_by_four_multiplies_pixels_by_sixteen() {
        let r = grid(7, 5, 30.0);
        let u = bilinear_upsample(&r, 4).unwrap();
        assert_eq!(u.len(), 16 * r.len());
        assert_eq!(u.extent(), r.extent());
    }

    #[test]
    fn upsample_factor_one_is_identity() {
        let r = grid(3, 3, 2.0);
        assert_eq!(bilinear_upsample(&r, 1).unwrap(), r);
    }

    #[test]
    fn upsample_zero_factor() {
        assert!(matches!(bilinear_upsample(&grid(2, 2, 1.0), 0), Err(RasterError::ZeroFactor)));
    }

    #[test]
    fn upsample_propagates_nodata() {
        let r = Raster::new(2, 1, vec![Band::new("v", vec![-9.0, 1.0])], GeoTransform::unit(), Some(-9.0)).unwrap();
        let u = bilinear_upsample(&r, 2).unwrap();
        assert_eq!(u.bands()[0].data[..4], [-9.0, -9.0, -9.0, 1.0]);
    }

    #[test]
    fn mask_upsample_replicates_blocks() {
        let m = Mask::new(2, 1, vec![0, 1]).unwrap();
        let u = upsample_mask(&m, 2).unwrap();
        assert_eq!(u.values(), &[0, 0, 1, 1, 0, 0, 1, 1]);
        assert!(upsample_mask(&m, 0).is_err());
    }
}
