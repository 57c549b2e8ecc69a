//! Reconstruction and detection metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{polar_bin_center_m, FrameGeometry, PolarFrame, N_AZIMUTH, N_RANGE};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub const AP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
}

impl AxisBox {
    pub fn new(center_x: f64, center_y: f64, width: f64, height: f64) -> Self {
        Self {
            center_x,
            center_y,
            width,
            height,
        }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, (x1 - x0).abs(), (y1 - y0).abs())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        (self.center_x - hw, self.center_y - hh, self.center_x + hw, self.center_y + hh)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }
}

pub fn iou(a: &AxisBox, b: &AxisBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: AxisBox,
    pub score: f64,
}

/// True/false positive flags in descending score order (stable for ties).
pub fn match_detections(dets: &[ScoredBox], truth: &[AxisBox], threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score));
    let mut taken = vec![false; truth.len()];
    order
        .iter()
        .map(|&i| {
            let mut best: Option<(usize, f64)> = None;
            for (t, gt) in truth.iter().enumerate() {
                if taken[t] {
                    continue;
                }
                let o = iou(&dets[i].bbox, gt);
                if o >= threshold && best.is_none_or(|(_, b)| o > b) {
                    best = Some((t, o));
                }
            }
            match best {
                Some((t, _)) => {
                    taken[t] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Area under the all-points interpolated precision/recall curve.
pub fn average_precision(dets: &[ScoredBox], truth: &[AxisBox], threshold: f64) -> f64 {
    if truth.is_empty() {
        return if dets.is_empty() { 1.0 } else { 0.0 };
    }
    let tp = match_detections(dets, truth, threshold);
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &hit) in tp.iter().enumerate() {
        if hit {
            hits += 1;
        }
        recall.push(hits as f64 / truth.len() as f64);
        precision.push(hits as f64 / (k + 1) as f64);
    }
    // precision envelope from the right
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// AP averaged over [`AP_THRESHOLDS`].
pub fn mean_average_precision(dets: &[ScoredBox], truth: &[AxisBox]) -> f64 {
    AP_THRESHOLDS
        .iter()
        .map(|&t| average_precision(dets, truth, t))
        .sum::<f64>()
        / AP_THRESHOLDS.len() as f64
}

fn check_shapes(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// `||rec - orig||^2 / ||orig||^2`; `None` when the original is all zero.
pub fn nmse(original: &[f32], reconstruction: &[f32]) -> Result<Option<f64>> {
    check_shapes(original, reconstruction)?;
    let (mut err, mut energy) = (0.0f64, 0.0f64);
    for (&o, &r) in original.iter().zip(reconstruction) {
        let d = r as f64 - o as f64;
        err += d * d;
        energy += o as f64 * o as f64;
    }
    Ok(if energy > 0.0 { Some(err / energy) } else { None })
}

/// PSNR against the original's peak. Infinite for an exact match, NaN when
/// the original is all zero.
pub fn psnr_db(original: &[f32], reconstruction: &[f32]) -> Result<f64> {
    check_shapes(original, reconstruction)?;
    let peak = original.iter().fold(0.0f64, |m, &v| m.max(v as f64));
    let mse = original
        .iter()
        .zip(reconstruction)
        .map(|(&o, &r)| {
            let d = r as f64 - o as f64;
            d * d
        })
        .sum::<f64>()
        / original.len().max(1) as f64;
    if peak == 0.0 {
        return Ok(f64::NAN);
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

/// NMSE restricted to polar bins whose centres fall inside any of `boxes`.
/// `None` when those bins carry no energy in the original.
pub fn box_nmse(original: &PolarFrame, reconstruction: &PolarFrame, boxes: &[AxisBox], geom: &FrameGeometry) -> Result<Option<f64>> {
    check_shapes(original.data(), reconstruction.data())?;
    if boxes.is_empty() {
        return Ok(None);
    }
    let (o, r) = (original.data(), reconstruction.data());
    let (mut err, mut energy) = (0.0f64, 0.0f64);
    for row in 0..N_AZIMUTH {
        for col in 0..N_RANGE {
            let (x, y) = polar_bin_center_m(row, col, geom);
            if boxes.iter().any(|b| b.contains(x, y)) {
                let i = row * N_RANGE + col;
                let d = r[i] as f64 - o[i] as f64;
                err += d * d;
                energy += o[i] as f64 * o[i] as f64;
            }
        }
    }
    Ok(if energy > 0.0 { Some(err / energy) } else { None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBundle {
    /// NaN when the original frame is all zero.
    pub nmse: f64,
    pub nmse_defined: bool,
    pub psnr_db: f64,
    /// Fraction in [0, 1].
    pub ap50: f64,
    /// Fraction in [0, 1].
    pub ap: f64,
    /// Error inside annotated boxes, NaN when undefined.
    pub box_nmse: f64,
    pub n_detections: usize,
    pub n_truth: usize,
}

pub fn frame_metrics(
    original: &PolarFrame,
    reconstruction: &PolarFrame,
    dets: &[ScoredBox],
    truth: &[AxisBox],
    geom: &FrameGeometry,
) -> Result<MetricBundle> {
    let n = nmse(original.data(), reconstruction.data())?;
    Ok(MetricBundle {
        nmse: n.unwrap_or(f64::NAN),
        nmse_defined: n.is_some(),
        psnr_db: psnr_db(original.data(), reconstruction.data())?,
        ap50: average_precision(dets, truth, 0.5),
        ap: mean_average_precision(dets, truth),
        box_nmse: box_nmse(original, reconstruction, truth, geom)?.unwrap_or(f64::NAN),
        n_detections: dets.len(),
        n_truth: truth.len(),
    })
}
