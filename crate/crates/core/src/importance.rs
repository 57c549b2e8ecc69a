//! Detections to important blocks.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{cartesian_point_to_block, BlockIndex, BlockSet, FrameGeometry};

/// Objects at least this long are treated as large.
pub const LARGE_OBJECT_M: f64 = 6.0;
/// Below this range small patterns are used in Rad-Info-2.
pub const FAR_RANGE_M: f64 = 50.0;
/// Below this range the azimuth strip is added.
pub const NEAR_AV_RANGE_M: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeClass {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternVariant {
    RadInfo1,
    RadInfo2,
}

impl core::str::FromStr for PatternVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "radinfo1" | "1" => Ok(Self::RadInfo1),
            "radinfo2" | "2" => Ok(Self::RadInfo2),
            _ => Err(Error::Parameter(alloc::format!("unknown pattern variant '{s}'"))),
        }
    }
}

impl core::fmt::Display for PatternVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Self::RadInfo1 => "radinfo1",
            Self::RadInfo2 => "radinfo2",
        })
    }
}

/// A detected vehicle in AV-centred Cartesian meters (+y ahead, +x right).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub size_class: SizeClass,
    pub score: f64,
}

impl Detection {
    /// Size class is derived from the extents.
    pub fn new(center_x_m: f64, center_y_m: f64, width_m: f64, height_m: f64, score: f64) -> Result<Self> {
        let det = Self {
            center_x_m,
            center_y_m,
            width_m,
            height_m,
            size_class: classify_extent(width_m, height_m),
            score,
        };
        det.validate(&FrameGeometry::default())?;
        Ok(det)
    }

    pub fn validate(&self, geom: &FrameGeometry) -> Result<()> {
        if !(self.width_m > 0.0 && self.height_m > 0.0 && self.width_m.is_finite() && self.height_m.is_finite()) {
            return Err(Error::Parameter("detection extents must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Parameter(alloc::format!("detection score {} outside [0, 1]", self.score)));
        }
        let r = self.range_m();
        if !(r <= geom.max_range_m) {
            return Err(Error::OutsideDisc {
                range_m: r,
                max_range_m: geom.max_range_m,
            });
        }
        Ok(())
    }

    pub fn range_m(&self) -> f64 {
        libm::hypot(self.center_x_m, self.center_y_m)
    }

    /// Block holding the box centre.
    pub fn block(&self, geom: &FrameGeometry) -> Result<BlockIndex> {
        cartesian_point_to_block(self.center_x_m, self.center_y_m, geom)
    }
}

fn classify_extent(width_m: f64, height_m: f64) -> SizeClass {
    if width_m.max(height_m) >= LARGE_OBJECT_M {
        SizeClass::Large
    } else {
        SizeClass::Small
    }
}

pub fn classify_size(det: &Detection) -> SizeClass {
    classify_extent(det.width_m, det.height_m)
}

fn pattern(center: BlockIndex, offsets: impl IntoIterator<Item = (i64, i64)>) -> BlockSet {
    offsets
        .into_iter()
        .filter_map(|(da, dr)| center.offset(da, dr))
        .collect()
}

fn square(center: BlockIndex, half: i64) -> BlockSet {
    pattern(
        center,
        (-half..=half).flat_map(|da| (-half..=half).map(move |dr| (da, dr))),
    )
}

/// Neighbourhood for small objects.
pub fn pattern_3x3(center: BlockIndex) -> BlockSet {
    square(center, 1)
}

/// Neighbourhood for large objects.
pub fn pattern_5x5(center: BlockIndex) -> BlockSet {
    square(center, 2)
}

/// Far-range pattern: three azimuth blocks on the near and centre rows, five
/// on the row beyond the object.
pub fn pattern_t(center: BlockIndex) -> BlockSet {
    let near = (-1..=1).map(|da| (da, -1));
    let mid = (-1..=1).map(|da| (da, 0));
    let far = (-2..=2).map(|da| (da, 1));
    pattern(center, near.chain(mid).chain(far))
}

/// Three blocks either side in azimuth on the object's own range row, for
/// objects closer than 16 m.
pub fn near_av_augment(center: BlockIndex, range_m: f64) -> BlockSet {
    if !(range_m < NEAR_AV_RANGE_M) {
        return BlockSet::new();
    }
    pattern(center, (1..=3).flat_map(|d| [(d, 0), (-d, 0)]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskOptions {
    /// `None` = on for Rad-Info-2, off for Rad-Info-1.
    pub near_av: Option<bool>,
    /// Rad-Info-2 only: use 3x3 for large objects within 50 m too.
    pub compact_near_large: bool,
    pub geometry: FrameGeometry,
}

impl Default for MaskOptions {
    fn default() -> Self {
        Self {
            near_av: None,
            compact_near_large: false,
            geometry: FrameGeometry::default(),
        }
    }
}

impl MaskOptions {
    pub fn near_av_enabled(&self, variant: PatternVariant) -> bool {
        self.near_av.unwrap_or(variant == PatternVariant::RadInfo2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMask {
    pub important: BlockSet,
    pub source_detections: Vec<Detection>,
    pub variant: PatternVariant,
}

impl ImportanceMask {
    pub fn empty(variant: PatternVariant) -> Self {
        Self {
            important: BlockSet::new(),
            source_detections: Vec::new(),
            variant,
        }
    }

    pub fn len(&self) -> usize {
        self.important.len()
    }

    pub fn is_empty(&self) -> bool {
        self.important.is_empty()
    }
}

/// Blocks contributed by a single detection.
pub fn detection_pattern(det: &Detection, variant: PatternVariant, opts: &MaskOptions) -> Option<BlockSet> {
    let center = det.block(&opts.geometry).ok()?;
    let range = det.range_m();
    let mut set = match (variant, det.size_class) {
        (PatternVariant::RadInfo2, _) if range >= FAR_RANGE_M => pattern_t(center),
        (PatternVariant::RadInfo2, SizeClass::Large) if opts.compact_near_large => pattern_3x3(center),
        (_, SizeClass::Small) => pattern_3x3(center),
        (_, SizeClass::Large) => pattern_5x5(center),
    };
    if opts.near_av_enabled(variant) {
        set.union_with(&near_av_augment(center, range));
    }
    Some(set)
}

/// Union of per-detection patterns. Detections whose centre cannot be placed
/// on the grid (at the origin or outside the disc) contribute nothing.
pub fn build_mask(dets: &[Detection], variant: PatternVariant, opts: &MaskOptions) -> ImportanceMask {
    let mut important = BlockSet::new();
    let mut sources = Vec::new();
    for det in dets {
        if let Some(set) = detection_pattern(det, variant, opts) {
            important.union_with(&set);
            sources.push(*det);
        }
    }
    ImportanceMask {
        important,
        source_detections: sources,
        variant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(a: usize, r: usize) -> BlockIndex {
        BlockIndex::new(a, r).unwrap()
    }

    fn set(items: &[(usize, usize)]) -> BlockSet {
        items.iter().map(|&(a, r)| b(a, r)).collect()
    }

    /// Detection centred on the middle of block `(a, r)`.
    fn det_at(a: usize, r: usize, w: f64, h: f64) -> Detection {
        let g = FrameGeometry::default();
        let az = ((a as f64 + 0.5) * g.block_azimuth_deg()).to_radians();
        let rng = (r as f64 + 0.5) * g.block_range_m();
        Detection::new(rng * libm::sin(az), rng * libm::cos(az), w, h, 0.9).unwrap()
    }

    #[test]
    fn size_classes() {
        assert_eq!(classify_extent(4.5, 1.8), SizeClass::Small);
        assert_eq!(classify_extent(12.0, 2.5), SizeClass::Large);
        assert_eq!(classify_extent(6.0, 1.0), SizeClass::Large);
        assert_eq!(classify_extent(1.0, 5.999), SizeClass::Small);
    }

    #[test]
    fn squares_wrap_and_clip() {
        assert_eq!(pattern_3x3(b(10, 5)).len(), 9);
        let wrap = pattern_3x3(b(0, 5));
        assert_eq!(wrap.len(), 9);
        assert!(wrap.contains(b(19, 5)));
        assert_eq!(pattern_3x3(b(10, 0)).len(), 6);
        assert_eq!(pattern_5x5(b(10, 5)).len(), 25);
        assert_eq!(pattern_5x5(b(10, 11)).len(), 15);
        let wrap5 = pattern_5x5(b(1, 5));
        for a in [19, 0, 1, 2, 3] {
            assert!(wrap5.contains(b(a, 5)));
        }
    }

    #[test]
    fn t_pattern_rows() {
        let t = pattern_t(b(10, 8));
        let expected = set(&[
            (9, 7), (10, 7), (11, 7),
            (9, 8), (10, 8), (11, 8),
            (8, 9), (9, 9), (10, 9), (11, 9), (12, 9),
        ]);
        assert_eq!(t, expected);
        assert_eq!(pattern_t(b(10, 11)).len(), 6);
    }

    #[test]
    fn near_av_strip() {
        let s = near_av_augment(b(5, 1), 10.0);
        assert_eq!(s, set(&[(2, 1), (3, 1), (4, 1), (6, 1), (7, 1), (8, 1)]));
        assert!(near_av_augment(b(5, 1), 20.0).is_empty());
        assert!(near_av_augment(b(5, 1), 16.0).is_empty());
    }

    #[test]
    fn mask_examples() {
        let opts = MaskOptions::default();
        assert!(build_mask(&[], PatternVariant::RadInfo2, &opts).is_empty());

        // 30 m small object, block (5, 3)
        let small = det_at(5, 3, 4.5, 1.8);
        for v in [PatternVariant::RadInfo1, PatternVariant::RadInfo2] {
            assert_eq!(build_mask(&[small], v, &opts).len(), 9);
        }

        // 70 m large object sits in range block 8
        let large = det_at(10, 8, 12.0, 2.5);
        assert_eq!(large.block(&opts.geometry).unwrap(), b(10, 8));
        assert_eq!(build_mask(&[large], PatternVariant::RadInfo1, &opts).len(), 25);
        assert_eq!(build_mask(&[large], PatternVariant::RadInfo2, &opts).len(), 11);
    }

    #[test]
    fn near_av_defaults_per_variant() {
        let opts = MaskOptions::default();
        let close = det_at(5, 1, 4.0, 2.0);
        assert_eq!(build_mask(&[close], PatternVariant::RadInfo1, &opts).len(), 9);
        // 3x3 plus the two extra blocks on each side beyond it
        assert_eq!(build_mask(&[close], PatternVariant::RadInfo2, &opts).len(), 13);
        let forced = MaskOptions {
            near_av: Some(true),
            ..opts
        };
        assert_eq!(build_mask(&[close], PatternVariant::RadInfo1, &forced).len(), 13);
    }

    #[test]
    fn compact_option_for_large_near_objects() {
        let large = det_at(4, 3, 10.0, 3.0);
        let opts = MaskOptions::default();
        assert_eq!(build_mask(&[large], PatternVariant::RadInfo2, &opts).len(), 25);
        let compact = MaskOptions {
            compact_near_large: true,
            ..opts
        };
        assert_eq!(build_mask(&[large], PatternVariant::RadInfo2, &compact).len(), 9);
        assert_eq!(build_mask(&[large], PatternVariant::RadInfo1, &compact).len(), 25);
    }

    #[test]
    fn unplaceable_detection_skipped() {
        let mut d = det_at(3, 3, 2.0, 2.0);
        d.center_x_m = 0.0;
        d.center_y_m = 0.0;
        let m = build_mask(&[d], PatternVariant::RadInfo1, &MaskOptions::default());
        assert!(m.is_empty());
        assert!(m.source_detections.is_empty());
    }

    #[test]
    fn invalid_detections_rejected() {
        assert!(Detection::new(10.0, 10.0, 0.0, 1.0, 0.5).is_err());
        assert!(Detection::new(90.0, 90.0, 1.0, 1.0, 0.5).is_err());
        assert!(Detection::new(10.0, 10.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn parse_variant() {
        assert_eq!("rad-info-2".parse::<PatternVariant>().unwrap(), PatternVariant::RadInfo2);
        assert_eq!("RadInfo1".parse::<PatternVariant>().unwrap(), PatternVariant::RadInfo1);
        assert!("3".parse::<PatternVariant>().is_err());
    }
}
