use log::warn;

use super::{Band, GeoTransform, Mask, Raster, RasterError, Result, MASK_NODATA};
use crate::rng::{shuffle, SplitMix64};

/// Fill value for padded pixels when the source raster has no sentinel.
const PAD_NODATA: f32 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub raster: Raster,
    pub mask: Mask,
}

impl Tile {
    /// World coordinate of the tile's center.
    pub fn center(&self) -> (f64, f64) {
        let e = self.raster.extent();
        ((e.min_x + e.max_x) / 2.0, (e.min_y + e.max_y) / 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct TileSet {
    pub tile_size: usize,
    pub tiles: Vec<Tile>,
    /// Parallel to `tiles` once a split has been assigned.
    pub split: Option<Vec<Split>>,
}

impl TileSet {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn split_of(&self, index: usize) -> Option<Split> {
        self.split.as_ref().map(|s| s[index])
    }

    pub fn count(&self, which: Split) -> usize {
        self.split.as_ref().map_or(0, |s| s.iter().filter(|&&x| x == which).count())
    }

    /// Returns a set containing only the tiles at `indices`, keeping any split.
    pub fn subset(&self, indices: &[usize]) -> TileSet {
        TileSet {
            tile_size: self.tile_size,
            tiles: indices.iter().map(|&i| self.tiles[i].clone()).collect(),
            split: self.split.as_ref().map(|s| indices.iter().map(|&i| s[i]).collect()),
        }
    }
}

/// Number of tile columns and rows for a `width × height` grid.
pub fn tile_grid(width: usize, height: usize, tile_size: usize, drop_partial: bool) -> (usize, usize) {
    if tile_size == 0 {
        return (0, 0);
    }
    if drop_partial {
        (width / tile_size, height / tile_size)
    } else {
        (width.div_ceil(tile_size), height.div_ceil(tile_size))
    }
}

/// Cuts a raster and its mask into square tiles, row-major.
///
/// With `drop_partial` the right and bottom remainders are discarded;
/// otherwise edge tiles are padded with nodata (mask 255).
pub fn tile(raster: &Raster, mask: &Mask, tile_size: usize, drop_partial: bool) -> Result<TileSet> {
    if tile_size == 0 {
        return Err(RasterError::ZeroTileSize);
    }
    if (mask.width(), mask.height()) != (raster.width(), raster.height()) {
        return Err(RasterError::Dimensions(raster.width(), raster.height(), mask.width(), mask.height()));
    }
    let (cols, rows) = tile_grid(raster.width(), raster.height(), tile_size, drop_partial);
    let t = raster.transform();
    let fill = raster.nodata().unwrap_or(PAD_NODATA);
    let padded = !drop_partial
        && (!raster.width().is_multiple_of(tile_size) || !raster.height().is_multiple_of(tile_size));
    let nodata = if padded { Some(fill) } else { raster.nodata() };
    let mut tiles = Vec::with_capacity(cols * rows);
    for tr in 0..rows {
        for tc in 0..cols {
            let (c0, r0) = (tc * tile_size, tr * tile_size);
            let bands = raster
                .bands()
                .iter()
                .map(|band| {
                    let mut data = vec![fill; tile_size * tile_size];
                    copy_window(&band.data, raster.width(), raster.height(), c0, r0, tile_size, &mut data);
                    Band::new(band.name.clone(), data)
                })
                .collect();
            let mut mvals = vec![MASK_NODATA; tile_size * tile_size];
            copy_window(mask.values(), mask.width(), mask.height(), c0, r0, tile_size, &mut mvals);
            let transform = GeoTransform::new(
                t.origin_x + c0 as f64 * t.pixel_size_x,
                t.origin_y + r0 as f64 * t.pixel_size_y,
                t.pixel_size_x,
                t.pixel_size_y,
            );
            tiles.push(Tile {
                row: tr,
                col: tc,
                raster: Raster::new(tile_size, tile_size, bands, transform, nodata)?,
                mask: Mask::new(tile_size, tile_size, mvals)?,
            });
        }
    }
    Ok(TileSet { tile_size, tiles, split: None })
}

fn copy_window<T: Copy>(src: &[T], w: usize, h: usize, c0: usize, r0: usize, size: usize, dst: &mut [T]) {
    let cw = size.min(w.saturating_sub(c0));
    for dr in 0..size.min(h.saturating_sub(r0)) {
        let s = (r0 + dr) * w + c0;
        dst[dr * size..dr * size + cw].copy_from_slice(&src[s..s + cw]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let arr = [self.train, self.val, self.test];
        if arr.iter().any(|&x| !(x > 0.0)) || (arr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(RasterError::Fractions(arr));
        }
        Ok(())
    }

    /// Largest-remainder allocation of `n` items; ties favour train, then val.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train * n as f64, self.val * n as f64, self.test * n as f64];
        let mut counts = quotas.map(|q| q.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &k in order.iter().take(n.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitWarning {
    /// Fewer than three tiles; everything went to train.
    TooFewTiles(usize),
}

/// Deterministically assigns tiles to train / val / test.
///
/// Tile indices are shuffled with Fisher–Yates over SplitMix64(`seed`); the
/// first block goes to train, the next to val, the rest to test.
pub fn split_dataset(
    mut tiles: TileSet,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(TileSet, Option<SplitWarning>)> {
    fractions.validate()?;
    let n = tiles.len();
    if n < 3 {
        warn!("only {n} tiles available; assigning all of them to train");
        tiles.split = Some(vec![Split::Train; n]);
        return Ok((tiles, Some(SplitWarning::TooFewTiles(n))));
    }
    let [n_train, n_val, _] = fractions.counts(n);
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut SplitMix64::new(seed), &mut order);
    let mut split = vec![Split::Test; n];
    for (pos, &idx) in order.iter().enumerate() {
        split[idx] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    tiles.split = Some(split);
    Ok((tiles, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(w: usize, h: usize) -> (Raster, Mask) {
        let data = (0..w * h).map(|i| i as f32).collect();
        let r = Raster::new(w, h, vec![Band::new("v", data)], GeoTransform::unit(), None).unwrap();
        (r, Mask::filled(w, h, 1))
    }

    fn empty_tiles(n: usize) -> TileSet {
        let (r, m) = scene(1, 1);
        TileSet {
            tile_size: 1,
            tiles: (0..n).map(|i| Tile { row: 0, col: i, raster: r.clone(), mask: m.clone() }).collect(),
            split: None,
        }
    }

    #[test]
    fn published_tile_counts() {
        assert_eq!(tile_grid(8306, 5434, 256, true), (32, 21));
        assert_eq!(tile_grid(9046, 5709, 256, true), (35, 22));
    }

    #[test]
    fn single_tile() {
        let (r, m) = scene(256, 256);
        let ts = tile(&r, &m, 256, true).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts.tiles[0].raster, r);
    }

    #[test]
    fn tiles_copy_their_window() {
        let (r, m) = scene(5, 4);
        let ts = tile(&r, &m, 2, true).unwrap();
        assert_eq!(ts.len(), 4);
        let t = &ts.tiles[1];
        assert_eq!((t.row, t.col), (0, 1));
        assert_eq!(t.raster.bands()[0].data, vec![2.0, 3.0, 7.0, 8.0]);
        assert_eq!(t.raster.transform().origin_x, 2.0);
    }

    #[test]
    fn partial_tiles_are_padded() {
        let (r, m) = scene(3, 3);
        let ts = tile(&r, &m, 2, false).unwrap();
        assert_eq!(ts.len(), 4);
        let corner = &ts.tiles[3];
        assert_eq!(corner.raster.bands()[0].data, vec![8.0, -9999.0, -9999.0, -9999.0]);
        assert_eq!(corner.mask.values(), &[1, 255, 255, 255]);
        assert_eq!(corner.raster.nodata(), Some(-9999.0));
    }

    #[test]
    fn zero_tile_size() {
        let (r, m) = scene(2, 2);
        assert!(matches!(tile(&r, &m, 0, true), Err(RasterError::ZeroTileSize)));
    }

    #[test]
    fn split_counts_match_floor_arithmetic() {
        let f = SplitFractions::default();
        assert_eq!(f.counts(672), [538, 67, 67]);
        assert_eq!(f.counts(770), [616, 77, 77]);
    }

    #[test]
    fn split_is_deterministic() {
        let (a, _) = split_dataset(empty_tiles(50), SplitFractions::default(), 9).unwrap();
        let (b, _) = split_dataset(empty_tiles(50), SplitFractions::default(), 9).unwrap();
        assert_eq!(a.split, b.split);
        assert_eq!([a.count(Split::Train), a.count(Split::Val), a.count(Split::Test)], [40, 5, 5]);
    }

    #[test]
    fn tiny_sets_go_to_train() {
        let (ts, warning) = split_dataset(empty_tiles(2), SplitFractions::default(), 1).unwrap();
        assert_eq!(warning, Some(SplitWarning::TooFewTiles(2)));
        assert_eq!(ts.count(Split::Train), 2);
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitFractions::new(0.8, 0.1, 0.2).is_err());
        assert!(SplitFractions::new(1.0, 0.0, 0.0).is_err());
    }
}
