//! Closed acquisition loop: detect on frame k-1, plan, sense and reconstruct
//! frame k.

use alloc::vec::Vec;

use crate::cs::{reconstruct_frame, sense_frame, BpSolverConfig, ConvergenceReport, FrameMeasurements};
use crate::detector::{detect, Annotations, DetectorBackend, GroundTruthBox};
use crate::error::{Error, Result};
use crate::evaluation::{frame_metrics, AxisBox, MetricBundle, ScoredBox};
use crate::geometry::{PolarFrame, ScanConverter};
use crate::importance::{build_mask, Detection, ImportanceMask, MaskOptions, PatternVariant};
use crate::lp::{adaptive_plan, budget_for_rate, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One uniform rate for every block.
    Standard,
    Adaptive(PatternVariant),
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("standard") || s.eq_ignore_ascii_case("standardcs") {
            return Ok(Self::Standard);
        }
        s.parse().map(Self::Adaptive)
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Standard => f.write_str("standard"),
            Self::Adaptive(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub sampling_rate: f64,
    pub strategy: Strategy,
    pub backend: DetectorBackend,
    pub seed: u64,
    /// Upper bound on processed frames; shorter scenes run to the end.
    pub n_frames: usize,
    pub solver: BpSolverConfig,
    pub mask: MaskOptions,
    /// Detections below this score do not mark blocks important.
    pub score_threshold: f64,
    /// Plan frame k from detections on the original frame k-1.
    pub plan_from_original: bool,
    /// Store every n-th frame raw (frame 1 always is).
    pub resync_every: Option<usize>,
}

impl SceneConfig {
    pub fn new(sampling_rate: f64, strategy: Strategy, backend: DetectorBackend, seed: u64) -> Self {
        Self {
            sampling_rate,
            strategy,
            backend,
            seed,
            n_frames: 20,
            solver: BpSolverConfig::default(),
            mask: MaskOptions::default(),
            score_threshold: 0.5,
            plan_from_original: false,
            resync_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::Parameter("n_frames must be at least 1".into()));
        }
        if self.resync_every == Some(0) {
            return Err(Error::Parameter("resync interval must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Parameter("score threshold must lie in [0, 1]".into()));
        }
        self.solver.validate()?;
        budget_for_rate(self.sampling_rate)?;
        match self.strategy {
            Strategy::Standard => SamplingPlan::uniform(self.sampling_rate).map(|_| ()),
            Strategy::Adaptive(_) => crate::lp::bounds_for_rate(self.sampling_rate).map(|_| ()),
        }
    }

    fn is_raw_frame(&self, k: usize) -> bool {
        k == 0 || self.resync_every.is_some_and(|n| k % n == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub plan: SamplingPlan,
    pub measurements: FrameMeasurements,
    pub reconstruction: PolarFrame,
    /// Detections on the reconstruction.
    pub detections: Vec<Detection>,
    /// Detector could not produce output for this frame.
    pub detection_warning: bool,
    /// Mask that shaped this frame's plan; `None` for raw and uniform frames.
    pub mask_used: Option<ImportanceMask>,
    pub metrics: MetricBundle,
    pub convergence: ConvergenceReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregateMetrics {
    /// Means over frames where the value is defined and finite.
    pub nmse: f64,
    pub psnr_db: f64,
    pub ap50: f64,
    pub ap: f64,
    pub box_nmse: f64,
    pub n_detections: usize,
    pub n_truth: usize,
    pub total_measurements: usize,
    pub unconverged_blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRun {
    pub config: SceneConfig,
    pub records: Vec<FrameRecord>,
    pub aggregate: AggregateMetrics,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.filter(|v| v.is_finite()) {
        n += 1;
        sum += v;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn aggregate(records: &[FrameRecord]) -> AggregateMetrics {
    AggregateMetrics {
        nmse: finite_mean(records.iter().map(|r| r.metrics.nmse)),
        psnr_db: finite_mean(records.iter().map(|r| r.metrics.psnr_db)),
        ap50: finite_mean(records.iter().map(|r| r.metrics.ap50)),
        ap: finite_mean(records.iter().map(|r| r.metrics.ap)),
        box_nmse: finite_mean(records.iter().map(|r| r.metrics.box_nmse)),
        n_detections: records.iter().map(|r| r.metrics.n_detections).sum(),
        n_truth: records.iter().map(|r| r.metrics.n_truth).sum(),
        total_measurements: records.iter().map(|r| r.plan.total()).sum(),
        unconverged_blocks: records.iter().map(|r| r.convergence.unconverged()).sum(),
    }
}

/// Ground-truth boxes of one frame, in metric coordinates.
pub fn truth_boxes(ann: &Annotations, frame_id: u64) -> Vec<AxisBox> {
    ann.get(&frame_id)
        .map(|v| {
            v.iter()
                .map(|b: &GroundTruthBox| AxisBox::new(b.center_x_m, b.center_y_m, b.width_m, b.height_m))
                .collect()
        })
        .unwrap_or_default()
}

pub fn scored(dets: &[Detection]) -> Vec<ScoredBox> {
    dets.iter()
        .map(|d| ScoredBox {
            bbox: AxisBox::new(d.center_x_m, d.center_y_m, d.width_m, d.height_m),
            score: d.score,
        })
        .collect()
}

/// Detector output, or an empty list with a warning if the detector failed.
fn detect_or_empty(conv: &ScanConverter, frame: &PolarFrame, backend: &DetectorBackend) -> (Vec<Detection>, bool) {
    match detect(&conv.convert(frame), backend) {
        Ok(out) => (out.detections, out.missing_annotations),
        Err(_) => (Vec::new(), true),
    }
}

/// Run the loop over `frames` (at most `config.n_frames` of them). `truth`
/// is only used for metrics; the oracle backend carries its own copy.
pub fn run_scene(frames: &[PolarFrame], truth: &Annotations, config: &SceneConfig) -> Result<SceneRun> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::Parameter("scene has no frames".into()));
    }
    if frames.windows(2).any(|w| w[1].frame_id <= w[0].frame_id) {
        return Err(Error::Parameter("frame ids must be strictly increasing".into()));
    }
    let geom = config.mask.geometry;
    let conv = ScanConverter::new(geom);
    let budget = budget_for_rate(config.sampling_rate)?.samples;
    let n = frames.len().min(config.n_frames);

    let mut records: Vec<FrameRecord> = Vec::with_capacity(n);
    // detections that plan the next frame
    let mut planning: Vec<Detection> = Vec::new();
    for (k, original) in frames[..n].iter().enumerate() {
        let (plan, mask_used) = if config.is_raw_frame(k) {
            (SamplingPlan::full(), None)
        } else {
            match config.strategy {
                Strategy::Standard => (SamplingPlan::uniform(config.sampling_rate)?, None),
                Strategy::Adaptive(variant) => {
                    let confident: Vec<Detection> = planning
                        .iter()
                        .copied()
                        .filter(|d| d.score >= config.score_threshold)
                        .collect();
                    let mask = build_mask(&confident, variant, &config.mask);
                    (adaptive_plan(&mask.important, config.sampling_rate)?, Some(mask))
                }
            }
        };
        if !config.is_raw_frame(k) && plan.total() > budget {
            return Err(Error::Plan(alloc::format!(
                "frame {} plan uses {} of {budget} samples",
                original.frame_id,
                plan.total()
            )));
        }

        let measurements = sense_frame(original, &plan, config.seed)?;
        let rec = reconstruct_frame(&measurements, &config.solver)?;
        let (detections, detection_warning) = detect_or_empty(&conv, &rec.frame, &config.backend);

        planning = if config.plan_from_original {
            detect_or_empty(&conv, original, &config.backend).0
        } else {
            detections.clone()
        };

        let metrics = frame_metrics(
            original,
            &rec.frame,
            &scored(&detections),
            &truth_boxes(truth, original.frame_id),
            &geom,
        )?;
        records.push(FrameRecord {
            frame_id: original.frame_id,
            plan,
            measurements,
            reconstruction: rec.frame,
            detections,
            detection_warning,
            mask_used,
            metrics,
            convergence: rec.report,
        });
    }
    let aggregate = aggregate(&records);
    Ok(SceneRun {
        config: config.clone(),
        records,
        aggregate,
    })
}
