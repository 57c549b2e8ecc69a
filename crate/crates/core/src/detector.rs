//! Stand-in detectors operating on Cartesian frames.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{CartesianFrame, FrameGeometry};
use crate::importance::Detection;

/// An annotated vehicle box, axis aligned in AV-centred meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthBox {
    pub frame_id: u64,
    pub center_x_m: f64,
    pub center_y_m: f64,
    /// Extent along x.
    pub width_m: f64,
    /// Extent along y.
    pub height_m: f64,
}

impl GroundTruthBox {
    pub fn validate(&self, geom: &FrameGeometry) -> Result<()> {
        if !(self.width_m > 0.0 && self.height_m > 0.0 && self.width_m.is_finite() && self.height_m.is_finite()) {
            return Err(Error::Parameter(alloc::format!(
                "annotation in frame {} has non-positive extent",
                self.frame_id
            )));
        }
        let r = libm::hypot(self.center_x_m, self.center_y_m);
        if !(r <= geom.max_range_m) {
            return Err(Error::OutsideDisc {
                range_m: r,
                max_range_m: geom.max_range_m,
            });
        }
        Ok(())
    }

    pub fn to_detection(&self, score: f64) -> Result<Detection> {
        Detection::new(self.center_x_m, self.center_y_m, self.width_m, self.height_m, score)
    }
}

/// Boxes keyed by frame id.
pub type Annotations = BTreeMap<u64, Vec<GroundTruthBox>>;

/// Group a flat box list by frame.
pub fn group_annotations(boxes: impl IntoIterator<Item = GroundTruthBox>) -> Annotations {
    let mut out = Annotations::new();
    for b in boxes {
        out.entry(b.frame_id).or_default().push(b);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    /// `None` picks mean + 3 std of the nonzero pixels.
    pub threshold: Option<f64>,
    pub min_area_px: usize,
    pub max_detections: usize,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            threshold: None,
            min_area_px: 6,
            max_detections: 30,
        }
    }
}

impl BlobParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter("blob threshold must be positive".into()));
            }
        }
        if self.min_area_px == 0 {
            return Err(Error::Parameter("min_area_px must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorBackend {
    Oracle(Annotations),
    Blob(BlobParams),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionOutput {
    pub detections: Vec<Detection>,
    /// Oracle had no annotations for the frame.
    pub missing_annotations: bool,
}

pub fn detect(frame: &CartesianFrame, backend: &DetectorBackend) -> Result<DetectionOutput> {
    if frame.data.len() != frame.side * frame.side {
        return Err(Error::Shape {
            expected: frame.side * frame.side,
            actual: frame.data.len(),
        });
    }
    match backend {
        DetectorBackend::Oracle(ann) => match ann.get(&frame.frame_id) {
            None => Ok(DetectionOutput {
                detections: Vec::new(),
                missing_annotations: true,
            }),
            Some(boxes) => Ok(DetectionOutput {
                detections: boxes.iter().map(|b| b.to_detection(1.0)).collect::<Result<_>>()?,
                missing_annotations: false,
            }),
        },
        DetectorBackend::Blob(params) => {
            params.validate()?;
            Ok(DetectionOutput {
                detections: detect_blobs(frame, params),
                missing_annotations: false,
            })
        }
    }
}

/// mean + 3 std over nonzero pixels, `None` for an all-zero frame.
pub fn auto_threshold(data: &[f32]) -> Option<f64> {
    let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
    for &v in data {
        if v != 0.0 {
            let v = v as f64;
            n += 1;
            sum += v;
            sq += v * v;
        }
    }
    if n == 0 {
        return None;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    Some(mean + 3.0 * libm::sqrt(var))
}

struct Component {
    area: usize,
    mass: f64,
    peak: f64,
    rows: (usize, usize),
    cols: (usize, usize),
    first: usize,
}

fn detect_blobs(frame: &CartesianFrame, params: &BlobParams) -> Vec<Detection> {
    let threshold = match params.threshold.or_else(|| auto_threshold(&frame.data)) {
        Some(t) if t > 0.0 => t,
        _ => return Vec::new(),
    };
    let side = frame.side;
    let above = |i: usize| frame.data[i] as f64 > threshold;
    let mut seen = vec![false; side * side];
    let mut stack = Vec::new();
    let mut comps = Vec::new();

    for start in 0..side * side {
        if seen[start] || !above(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut c = Component {
            area: 0,
            mass: 0.0,
            peak: 0.0,
            rows: (usize::MAX, 0),
            cols: (usize::MAX, 0),
            first: start,
        };
        while let Some(i) = stack.pop() {
            let (r, col) = (i / side, i % side);
            let v = frame.data[i] as f64;
            c.area += 1;
            c.mass += v;
            c.peak = c.peak.max(v);
            c.rows = (c.rows.0.min(r), c.rows.1.max(r));
            c.cols = (c.cols.0.min(col), c.cols.1.max(col));
            let mut visit = |j: usize| {
                if !seen[j] && above(j) {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - side);
            }
            if r + 1 < side {
                visit(i + side);
            }
            if col > 0 {
                visit(i - 1);
            }
            if col + 1 < side {
                visit(i + 1);
            }
        }
        if c.area >= params.min_area_px {
            comps.push(c);
        }
    }

    // heaviest first; raster order of the seed pixel breaks ties
    comps.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.first.cmp(&b.first)));

    let res = frame.meters_per_pixel;
    comps
        .iter()
        .filter_map(|c| {
            let (x0, y0) = frame.pixel_center_m(c.rows.1, c.cols.0);
            let (x1, y1) = frame.pixel_center_m(c.rows.0, c.cols.1);
            let width = (c.cols.1 - c.cols.0 + 1) as f64 * res;
            let height = (c.rows.1 - c.rows.0 + 1) as f64 * res;
            let score = (1.0 - threshold / c.peak).clamp(0.0, 1.0);
            Detection::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, width, height, score).ok()
        })
        .take(params.max_detections)
        .collect()
}
