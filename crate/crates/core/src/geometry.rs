//! Polar raster geometry: frames, the 20x12 block grid and scan conversion
//! to a bird's-eye Cartesian raster.
//!
//! Azimuth convention: bin 0 points straight ahead of the vehicle (+y in the
//! Cartesian frame) and bins advance clockwise, so a bearing `az` maps to
//! `x = r sin(az)`, `y = r cos(az)`. Cartesian rasters are stored top row
//! first with the vehicle at the raster center.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Azimuth bins (rows) per polar frame.
pub const N_AZIMUTH: usize = 400;
/// Range bins (columns) per polar frame.
pub const N_RANGE: usize = 576;
/// Pixels per polar frame.
pub const FRAME_LEN: usize = N_AZIMUTH * N_RANGE;
/// Frame period of a 4 Hz scanning radar.
pub const FRAME_PERIOD_S: f64 = 0.25;

/// Block tiling of the polar frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGeometry;

impl BlockGeometry {
    /// Azimuth bins per block.
    pub const HEIGHT: usize = 20;
    /// Range bins per block.
    pub const WIDTH: usize = 48;
    /// Pixels per block.
    pub const LEN: usize = Self::HEIGHT * Self::WIDTH;
    /// Blocks along azimuth.
    pub const AZ_BLOCKS: usize = N_AZIMUTH / Self::HEIGHT;
    /// Blocks along range.
    pub const RANGE_BLOCKS: usize = N_RANGE / Self::WIDTH;
    /// Blocks per frame.
    pub const COUNT: usize = Self::AZ_BLOCKS * Self::RANGE_BLOCKS;
}

/// Pixels per block.
pub const BLOCK_LEN: usize = BlockGeometry::LEN;
/// Blocks per frame.
pub const N_BLOCKS: usize = BlockGeometry::COUNT;

/// Flattened (row-major) contents of one block.
pub type BlockVector = Vec<f64>;

/// Sensor geometry of the polar raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub n_azimuth_bins: usize,
    pub n_range_bins: usize,
    pub max_range_m: f64,
}

impl Default for FrameGeometry {
    fn default() -> Self {
        Self {
            n_azimuth_bins: N_AZIMUTH,
            n_range_bins: N_RANGE,
            max_range_m: 100.0,
        }
    }
}

impl FrameGeometry {
    /// Geometry with a different maximum range; bin counts are fixed.
    pub fn with_max_range(max_range_m: f64) -> Result<Self> {
        if !(max_range_m.is_finite() && max_range_m > 0.0) {
            return Err(Error::Parameter(alloc::format!(
                "max range must be positive, got {max_range_m}"
            )));
        }
        Ok(Self {
            max_range_m,
            ..Self::default()
        })
    }

    pub fn azimuth_step_deg(&self) -> f64 {
        360.0 / self.n_azimuth_bins as f64
    }

    pub fn range_step_m(&self) -> f64 {
        self.max_range_m / self.n_range_bins as f64
    }

    /// Angular extent of one block (18 degrees).
    pub fn block_azimuth_deg(&self) -> f64 {
        self.azimuth_step_deg() * BlockGeometry::HEIGHT as f64
    }

    /// Radial extent of one block (about 8.33 m).
    pub fn block_range_m(&self) -> f64 {
        self.range_step_m() * BlockGeometry::WIDTH as f64
    }

    /// Bearing in degrees, in `[0, 360)`, of a Cartesian offset.
    pub fn bearing_deg(x_m: f64, y_m: f64) -> f64 {
        let mut az = libm::atan2(x_m, y_m).to_degrees();
        if az < 0.0 {
            az += 360.0;
        }
        if az >= 360.0 {
            az -= 360.0;
        }
        az
    }
}

/// Position of a block in the 20 (azimuth) x 12 (range) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockIndex {
    pub az_block: usize,
    pub range_block: usize,
}

impl BlockIndex {
    pub fn new(az_block: usize, range_block: usize) -> Result<Self> {
        let idx = Self {
            az_block,
            range_block,
        };
        idx.validate()?;
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.az_block >= BlockGeometry::AZ_BLOCKS || self.range_block >= BlockGeometry::RANGE_BLOCKS {
            return Err(Error::BlockOutOfRange {
                az_block: self.az_block,
                range_block: self.range_block,
            });
        }
        Ok(())
    }

    /// Azimuth-major linear index in `0..240`.
    pub fn linear(&self) -> usize {
        self.az_block * BlockGeometry::RANGE_BLOCKS + self.range_block
    }

    pub fn from_linear(i: usize) -> Result<Self> {
        if i >= N_BLOCKS {
            return Err(Error::BlockOutOfRange {
                az_block: i / BlockGeometry::RANGE_BLOCKS,
                range_block: i % BlockGeometry::RANGE_BLOCKS,
            });
        }
        Ok(Self {
            az_block: i / BlockGeometry::RANGE_BLOCKS,
            range_block: i % BlockGeometry::RANGE_BLOCKS,
        })
    }

    /// Every block in linear order.
    pub fn all() -> impl Iterator<Item = BlockIndex> {
        (0..N_BLOCKS).map(|i| BlockIndex {
            az_block: i / BlockGeometry::RANGE_BLOCKS,
            range_block: i % BlockGeometry::RANGE_BLOCKS,
        })
    }

    /// Block displaced by `d_az` (wrapping around the full circle) and
    /// `d_range` (dropped when it leaves the grid).
    pub fn offset(&self, d_az: i64, d_range: i64) -> Option<BlockIndex> {
        let r = self.range_block as i64 + d_range;
        if r < 0 || r >= BlockGeometry::RANGE_BLOCKS as i64 {
            return None;
        }
        let a = (self.az_block as i64 + d_az).rem_euclid(BlockGeometry::AZ_BLOCKS as i64);
        Some(BlockIndex {
            az_block: a as usize,
            range_block: r as usize,
        })
    }
}

impl fmt::Display for BlockIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.az_block, self.range_block)
    }
}

/// Set of blocks stored as a 240-bit bitmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BlockSet {
    bits: [u64; 4],
}

impl BlockSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, idx: BlockIndex) -> bool {
        let i = idx.linear();
        let fresh = !self.contains(idx);
        self.bits[i / 64] |= 1 << (i % 64);
        fresh
    }

    pub fn contains(&self, idx: BlockIndex) -> bool {
        let i = idx.linear();
        i < N_BLOCKS && self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &BlockSet) {
        for (a, b) in self.bits.iter_mut().zip(other.bits.iter()) {
            *a |= *b;
        }
    }

    pub fn is_subset(&self, other: &BlockSet) -> bool {
        self.bits.iter().zip(other.bits.iter()).all(|(a, b)| a & !b == 0)
    }

    /// Members in linear order.
    pub fn iter(&self) -> impl Iterator<Item = BlockIndex> + '_ {
        BlockIndex::all().filter(move |b| self.contains(*b))
    }

    /// 30-byte little-endian bitmap, bit `i` = linear block `i`.
    pub fn to_bytes(&self) -> [u8; N_BLOCKS / 8] {
        let mut out = [0u8; N_BLOCKS / 8];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = (self.bits[i / 8] >> ((i % 8) * 8)) as u8;
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; N_BLOCKS / 8]) -> Self {
        let mut bits = [0u64; 4];
        for (i, &byte) in bytes.iter().enumerate() {
            bits[i / 8] |= (byte as u64) << ((i % 8) * 8);
        }
        Self { bits }
    }
}

impl FromIterator<BlockIndex> for BlockSet {
    fn from_iter<T: IntoIterator<Item = BlockIndex>>(iter: T) -> Self {
        let mut set = BlockSet::new();
        for b in iter {
            set.insert(b);
        }
        set
    }
}

/// One polar range-azimuth intensity image, azimuth-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFrame {
    pub frame_id: u64,
    pub timestamp_s: f64,
    data: Vec<f32>,
}

impl PolarFrame {
    pub fn new(frame_id: u64, timestamp_s: f64, data: Vec<f32>) -> Result<Self> {
        if data.len() != FRAME_LEN {
            return Err(Error::Shape {
                expected: FRAME_LEN,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidIntensity { index });
        }
        Ok(Self {
            frame_id,
            timestamp_s,
            data,
        })
    }

    pub fn zeros(frame_id: u64, timestamp_s: f64) -> Self {
        Self {
            frame_id,
            timestamp_s,
            data: vec![0.0; FRAME_LEN],
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * N_RANGE + col]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Overwrite one block in place; see [`insert_block`].
    pub fn set_block(&mut self, idx: BlockIndex, block: &[f64]) -> Result<()> {
        idx.validate()?;
        if block.len() != BLOCK_LEN {
            return Err(Error::Shape {
                expected: BLOCK_LEN,
                actual: block.len(),
            });
        }
        if let Some(i) = block.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            let row = idx.az_block * BlockGeometry::HEIGHT + i / BlockGeometry::WIDTH;
            let col = idx.range_block * BlockGeometry::WIDTH + i % BlockGeometry::WIDTH;
            return Err(Error::InvalidIntensity {
                index: row * N_RANGE + col,
            });
        }
        let row0 = idx.az_block * BlockGeometry::HEIGHT;
        let col0 = idx.range_block * BlockGeometry::WIDTH;
        for (r, src) in block.chunks_exact(BlockGeometry::WIDTH).enumerate() {
            let start = (row0 + r) * N_RANGE + col0;
            for (dst, &v) in self.data[start..start + BlockGeometry::WIDTH].iter_mut().zip(src) {
                *dst = v as f32;
            }
        }
        Ok(())
    }
}

/// Copy one block out of a frame, row-major within the block.
pub fn extract_block(frame: &PolarFrame, idx: BlockIndex) -> Result<BlockVector> {
    idx.validate()?;
    let row0 = idx.az_block * BlockGeometry::HEIGHT;
    let col0 = idx.range_block * BlockGeometry::WIDTH;
    let mut out = Vec::with_capacity(BLOCK_LEN);
    for r in row0..row0 + BlockGeometry::HEIGHT {
        let start = r * N_RANGE + col0;
        out.extend(frame.data[start..start + BlockGeometry::WIDTH].iter().map(|&v| v as f64));
    }
    Ok(out)
}

/// Write `block` into `frame` at `idx`. Values are stored as `f32`.
pub fn insert_block(mut frame: PolarFrame, idx: BlockIndex, block: &[f64]) -> Result<PolarFrame> {
    frame.set_block(idx, block)?;
    Ok(frame)
}

/// Block containing a Cartesian point given in meters relative to the vehicle.
///
/// Points exactly on the outer rim clamp into the last range ring.
pub fn cartesian_point_to_block(x_m: f64, y_m: f64, geom: &FrameGeometry) -> Result<BlockIndex> {
    let range = libm::hypot(x_m, y_m);
    if range == 0.0 {
        return Err(Error::DegeneratePoint);
    }
    if !(range <= geom.max_range_m) {
        return Err(Error::OutsideDisc {
            range_m: range,
            max_range_m: geom.max_range_m,
        });
    }
    let az = FrameGeometry::bearing_deg(x_m, y_m);
    let az_block = ((az / geom.block_azimuth_deg()) as usize).min(BlockGeometry::AZ_BLOCKS - 1);
    let range_block = ((range / geom.block_range_m()) as usize).min(BlockGeometry::RANGE_BLOCKS - 1);
    Ok(BlockIndex {
        az_block,
        range_block,
    })
}

/// Square bird's-eye intensity raster with the vehicle at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianFrame {
    pub frame_id: u64,
    pub side: usize,
    pub meters_per_pixel: f64,
    pub data: Vec<f32>,
}

impl CartesianFrame {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.side + col]
    }

    /// Cartesian coordinates (meters) of a pixel center.
    pub fn pixel_center_m(&self, row: usize, col: usize) -> (f64, f64) {
        pixel_center_m(self.side, self.meters_per_pixel, row, col)
    }

    /// Fractional (row, col) of a point in meters; pixel centers sit at
    /// half-integer positions.
    pub fn meters_to_pixel(&self, x_m: f64, y_m: f64) -> (f64, f64) {
        let half = self.side as f64 / 2.0;
        (half - y_m / self.meters_per_pixel, x_m / self.meters_per_pixel + half)
    }
}

fn pixel_center_m(side: usize, res: f64, row: usize, col: usize) -> (f64, f64) {
    let half = side as f64 / 2.0;
    ((col as f64 + 0.5 - half) * res, (half - row as f64 - 0.5) * res)
}

const OUTSIDE: u32 = u32::MAX;

/// Precomputed nearest-neighbour lookup from Cartesian pixels to polar bins.
///
/// The raster side is twice the range-bin count so one Cartesian pixel has
/// the radial resolution of one range bin (1152 px at 0.1736 m/px).
#[derive(Debug, Clone)]
pub struct ScanConverter {
    geom: FrameGeometry,
    side: usize,
    lut: Vec<u32>,
}

impl ScanConverter {
    pub fn new(geom: FrameGeometry) -> Self {
        let side = 2 * geom.n_range_bins;
        let res = geom.range_step_m();
        let az_step = geom.azimuth_step_deg();
        let mut lut = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                let (x, y) = pixel_center_m(side, res, row, col);
                let range = libm::hypot(x, y);
                if range >= geom.max_range_m {
                    lut.push(OUTSIDE);
                    continue;
                }
                let az = FrameGeometry::bearing_deg(x, y);
                let az_bin = ((az / az_step) as usize).min(geom.n_azimuth_bins - 1);
                let range_bin = ((range / res) as usize).min(geom.n_range_bins - 1);
                lut.push((az_bin * geom.n_range_bins + range_bin) as u32);
            }
        }
        Self { geom, side, lut }
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geom
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.geom.range_step_m()
    }

    /// Polar flat index sampled by a Cartesian pixel, `None` outside the disc.
    pub fn source_index(&self, row: usize, col: usize) -> Option<usize> {
        match self.lut[row * self.side + col] {
            OUTSIDE => None,
            i => Some(i as usize),
        }
    }

    pub fn convert(&self, frame: &PolarFrame) -> CartesianFrame {
        let src = frame.data();
        let data = self
            .lut
            .iter()
            .map(|&i| if i == OUTSIDE { 0.0 } else { src[i as usize] })
            .collect();
        CartesianFrame {
            frame_id: frame.frame_id,
            side: self.side,
            meters_per_pixel: self.meters_per_pixel(),
            data,
        }
    }
}

/// Nearest-neighbour scan conversion of a polar frame.
pub fn polar_to_cartesian(frame: &PolarFrame, geom: &FrameGeometry) -> CartesianFrame {
    ScanConverter::new(*geom).convert(frame)
}

/// Cartesian position (meters) of the center of polar bin `(row, col)`.
pub fn polar_bin_center_m(row: usize, col: usize, geom: &FrameGeometry) -> (f64, f64) {
    let az = ((row as f64 + 0.5) * geom.azimuth_step_deg()).to_radians();
    let r = (col as f64 + 0.5) * geom.range_step_m();
    (r * libm::sin(az), r * libm::cos(az))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_frame() -> PolarFrame {
        let data = (0..FRAME_LEN)
            .map(|i| (1000 * (i / N_RANGE) + i % N_RANGE) as f32)
            .collect();
        PolarFrame::new(1, 0.0, data).unwrap()
    }

    fn point(range: f64, az_deg: f64) -> (f64, f64) {
        let a = az_deg.to_radians();
        (range * libm::sin(a), range * libm::cos(a))
    }

    #[test]
    fn geometry_constants() {
        let g = FrameGeometry::default();
        assert!((g.azimuth_step_deg() * 400.0 - 360.0).abs() < 1e-12);
        assert!((g.range_step_m() * 576.0 - 100.0).abs() < 1e-12);
        assert!((g.block_azimuth_deg() - 18.0).abs() < 1e-12);
        assert!((g.block_range_m() - 8.333_333).abs() < 1e-5);
        assert_eq!(N_BLOCKS, 240);
        assert_eq!(BLOCK_LEN, 960);
    }

    #[test]
    fn extract_zero_frame() {
        let f = PolarFrame::zeros(1, 0.0);
        let b = extract_block(&f, BlockIndex::new(7, 3).unwrap()).unwrap();
        assert_eq!(b, vec![0.0; 960]);
    }

    #[test]
    fn extract_ramp_corners() {
        let f = ramp_frame();
        let b = extract_block(&f, BlockIndex::new(0, 0).unwrap()).unwrap();
        assert_eq!(b[0], 0.0);
        assert_eq!(b[959], 19047.0);
        let b = extract_block(&f, BlockIndex::new(19, 11).unwrap()).unwrap();
        assert_eq!(b[0], 380528.0);
    }

    #[test]
    fn out_of_grid_index_rejected() {
        let f = PolarFrame::zeros(1, 0.0);
        let bad = BlockIndex {
            az_block: 20,
            range_block: 0,
        };
        assert!(matches!(extract_block(&f, bad), Err(Error::BlockOutOfRange { .. })));
        assert!(BlockIndex::new(0, 12).is_err());
    }

    #[test]
    fn insert_zeros_counts_pixels() {
        let f = PolarFrame::new(1, 0.0, vec![1.0; FRAME_LEN]).unwrap();
        let f = insert_block(f, BlockIndex::new(0, 0).unwrap(), &[0.0; 960]).unwrap();
        assert_eq!(f.data().iter().filter(|&&v| v == 0.0).count(), 960);
    }

    #[test]
    fn insert_wrong_length_is_shape_error() {
        let f = PolarFrame::zeros(1, 0.0);
        let err = insert_block(f, BlockIndex::new(0, 0).unwrap(), &[0.0; 959]).unwrap_err();
        assert_eq!(
            err,
            Error::Shape {
                expected: 960,
                actual: 959
            }
        );
    }

    #[test]
    fn insert_then_extract_is_exact() {
        let f = PolarFrame::zeros(1, 0.0);
        let idx = BlockIndex::new(4, 9).unwrap();
        let block: Vec<f64> = (0..960).map(|i| i as f64 * 0.5).collect();
        let f = insert_block(f, idx, &block).unwrap();
        assert_eq!(extract_block(&f, idx).unwrap(), block);
    }

    #[test]
    fn blocks_tile_the_frame() {
        let f = ramp_frame();
        let mut g = PolarFrame::zeros(1, 0.0);
        for idx in BlockIndex::all() {
            g.set_block(idx, &extract_block(&f, idx).unwrap()).unwrap();
        }
        assert_eq!(f, g);
    }

    #[test]
    fn frame_invariants_enforced() {
        assert!(matches!(
            PolarFrame::new(1, 0.0, vec![0.0; 10]),
            Err(Error::Shape { .. })
        ));
        let mut d = vec![0.0; FRAME_LEN];
        d[5] = -1.0;
        assert_eq!(
            PolarFrame::new(1, 0.0, d).unwrap_err(),
            Error::InvalidIntensity { index: 5 }
        );
    }

    #[test]
    fn point_to_block_examples() {
        let g = FrameGeometry::default();
        let (x, y) = point(30.0, 45.0);
        assert_eq!(
            cartesian_point_to_block(x, y, &g).unwrap(),
            BlockIndex::new(2, 3).unwrap()
        );
        let (x, y) = point(99.9, 359.9);
        assert_eq!(
            cartesian_point_to_block(x, y, &g).unwrap(),
            BlockIndex::new(19, 11).unwrap()
        );
        let (x, y) = point(4.0, 0.0);
        assert_eq!(
            cartesian_point_to_block(x, y, &g).unwrap(),
            BlockIndex::new(0, 0).unwrap()
        );
        // rim clamps into the last ring
        assert_eq!(cartesian_point_to_block(0.0, 100.0, &g).unwrap().range_block, 11);
    }

    #[test]
    fn point_to_block_errors() {
        let g = FrameGeometry::default();
        assert_eq!(cartesian_point_to_block(0.0, 0.0, &g), Err(Error::DegeneratePoint));
        assert!(matches!(
            cartesian_point_to_block(80.0, 80.0, &g),
            Err(Error::OutsideDisc { .. })
        ));
    }

    #[test]
    fn zero_frame_scan_converts_to_zero() {
        let c = polar_to_cartesian(&PolarFrame::zeros(3, 0.0), &FrameGeometry::default());
        assert_eq!(c.side, 1152);
        assert_eq!(c.frame_id, 3);
        assert!(c.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_maps_to_forward_ray() {
        let mut d = vec![0.0f32; FRAME_LEN];
        d[..N_RANGE].fill(1.0);
        let f = PolarFrame::new(1, 0.0, d).unwrap();
        let c = polar_to_cartesian(&f, &FrameGeometry::default());
        let mut lit = 0;
        for row in 0..c.side {
            for col in 0..c.side {
                if c.get(row, col) > 0.0 {
                    lit += 1;
                    let (x, y) = c.pixel_center_m(row, col);
                    assert!(y > 0.0, "lit pixel behind the sensor");
                    // bin 0 spans bearings [0, 0.9)
                    assert!(FrameGeometry::bearing_deg(x, y) < 0.9);
                }
            }
        }
        assert!(lit > 100);
    }

    #[test]
    fn outside_disc_is_zero() {
        let f = PolarFrame::new(1, 0.0, vec![1.0; FRAME_LEN]).unwrap();
        let c = polar_to_cartesian(&f, &FrameGeometry::default());
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(576, 576), 1.0);
    }

    #[test]
    fn polar_bright_block_maps_back() {
        let g = FrameGeometry::default();
        let conv = ScanConverter::new(g);
        for (a, r) in [(0, 5), (7, 2), (13, 11), (19, 8)] {
            let idx = BlockIndex::new(a, r).unwrap();
            let f = insert_block(PolarFrame::zeros(1, 0.0), idx, &[1.0; 960]).unwrap();
            let c = conv.convert(&f);
            let mut hits = 0;
            for row in 0..c.side {
                for col in 0..c.side {
                    if c.get(row, col) > 0.0 {
                        hits += 1;
                        let (x, y) = c.pixel_center_m(row, col);
                        let b = cartesian_point_to_block(x, y, &g).unwrap();
                        let daz = (b.az_block as i64 - a as i64).rem_euclid(20);
                        assert!(daz <= 1 || daz == 19);
                        assert!((b.range_block as i64 - r as i64).abs() <= 1);
                    }
                }
            }
            assert!(hits > 0);
        }
    }

    #[test]
    fn block_set_ops() {
        let mut s = BlockSet::new();
        assert!(s.insert(BlockIndex::new(19, 11).unwrap()));
        assert!(!s.insert(BlockIndex::new(19, 11).unwrap()));
        s.insert(BlockIndex::new(0, 0).unwrap());
        assert_eq!(s.len(), 2);
        assert_eq!(BlockSet::from_bytes(&s.to_bytes()), s);
        let v: Vec<_> = s.iter().collect();
        assert_eq!(v[0], BlockIndex::new(0, 0).unwrap());
    }

    #[test]
    fn offsets_wrap_azimuth_and_drop_range() {
        let b = BlockIndex::new(0, 0).unwrap();
        assert_eq!(b.offset(-1, 0), Some(BlockIndex::new(19, 0).unwrap()));
        assert_eq!(b.offset(0, -1), None);
        assert_eq!(BlockIndex::new(19, 11).unwrap().offset(1, 0), Some(BlockIndex::new(0, 11).unwrap()));
    }
}
