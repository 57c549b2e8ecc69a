//! Scene-run report directories.
//!
//! ```text
//! run.toml                  settings, enough to repeat the run
//! metrics.csv               one row per frame plus a mean row
//! summary.json              aggregate metrics and solver totals
//! frames/frame_NNNN.rplan   plan
//! frames/frame_NNNN.rmeas   measurements
//! frames/frame_NNNN.radf    reconstruction
//! frames/frame_NNNN.json    detections, mask, metrics, convergence
//! frames/frame_NNNN.plan.csv
//! frames/frame_NNNN.mask.csv (adaptive frames only)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use radcs_core::detector::{group_annotations, BlobParams, DetectorBackend};
use radcs_core::evaluation::{frame_metrics, MetricBundle};
use radcs_core::importance::{Detection, MaskOptions};
use radcs_core::lp::{PlanKind, STANDARD_RATES};
use radcs_core::pipeline::{scored, truth_boxes, FrameRecord, SceneConfig, SceneRun, Strategy};
use radcs_core::cs::BpSolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{encode_rmeas, mask_csv, mask_hex, plan_csv, read_frame, write_radf, PlanFile};
use crate::scene::Scene;

pub const RUN_FILE: &str = "run.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FRAMES_DIR: &str = "frames";

/// Sampling rate given in percent; only 10, 20 and 30 have rate bounds.
pub fn rate_from_percent(percent: u32) -> Result<f64> {
    let rate = percent as f64 / 100.0;
    if STANDARD_RATES.iter().any(|&r| (r - rate).abs() < 1e-12) {
        Ok(rate)
    } else {
        Err(Error::Config(format!(
            "unsupported rate {percent}%: supported rates are 10, 20 and 30"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Ground-truth boxes from the scene annotations.
    Oracle,
    /// Threshold and connected-component blobs.
    Blob,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub penalty: f64,
    pub relaxation: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        BpSolverConfig::default().into()
    }
}

impl From<BpSolverConfig> for SolverSettings {
    fn from(c: BpSolverConfig) -> Self {
        Self {
            max_iterations: c.max_iterations,
            primal_tolerance: c.primal_tolerance,
            dual_tolerance: c.dual_tolerance,
            penalty: c.penalty,
            relaxation: c.relaxation,
        }
    }
}

impl From<SolverSettings> for BpSolverConfig {
    fn from(s: SolverSettings) -> Self {
        Self {
            max_iterations: s.max_iterations,
            primal_tolerance: s.primal_tolerance,
            dual_tolerance: s.dual_tolerance,
            penalty: s.penalty,
            relaxation: s.relaxation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub min_area_px: usize,
    pub max_detections: usize,
}

impl Default for BlobSettings {
    fn default() -> Self {
        let p = BlobParams::default();
        Self {
            threshold: p.threshold,
            min_area_px: p.min_area_px,
            max_detections: p.max_detections,
        }
    }
}

/// Everything that determines a scene run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub scene: PathBuf,
    pub rate_percent: u32,
    /// `standard`, `radinfo1` or `radinfo2`.
    pub variant: String,
    pub backend: BackendKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frames: Option<usize>,
    pub score_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_av: Option<bool>,
    #[serde(default)]
    pub compact_near_large: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resync_every: Option<usize>,
    #[serde(default)]
    pub plan_from_original: bool,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub blob: BlobSettings,
}

impl RunSettings {
    pub fn new(scene: PathBuf, rate_percent: u32, variant: &str, backend: BackendKind, seed: u64) -> Self {
        Self {
            scene,
            rate_percent,
            variant: variant.to_string(),
            backend,
            seed,
            max_frames: None,
            score_threshold: 0.5,
            near_av: None,
            compact_near_large: false,
            resync_every: None,
            plan_from_original: false,
            solver: SolverSettings::default(),
            blob: BlobSettings::default(),
        }
    }

    pub fn strategy(&self) -> Result<Strategy> {
        Ok(self.variant.parse::<Strategy>()?)
    }

    pub fn scene_config(&self, scene: &Scene) -> Result<SceneConfig> {
        let rate = rate_from_percent(self.rate_percent)?;
        let backend = match self.backend {
            BackendKind::Oracle => match &scene.annotations {
                Some(boxes) => DetectorBackend::Oracle(group_annotations(boxes.iter().copied())),
                None => {
                    return Err(Error::Config(format!(
                        "the oracle backend needs annotations, but scene '{}' lists no annotation file",
                        scene.manifest.scene_name
                    )))
                }
            },
            BackendKind::Blob => DetectorBackend::Blob(BlobParams {
                threshold: self.blob.threshold,
                min_area_px: self.blob.min_area_px,
                max_detections: self.blob.max_detections,
            }),
        };
        let mut cfg = SceneConfig::new(rate, self.strategy()?, backend, self.seed);
        cfg.n_frames = self.max_frames.unwrap_or(scene.frames.len());
        cfg.solver = self.solver.into();
        cfg.mask = MaskOptions {
            near_av: self.near_av,
            compact_near_large: self.compact_near_large,
            geometry: scene.geometry,
        };
        cfg.score_threshold = self.score_threshold;
        cfg.plan_from_original = self.plan_from_original;
        cfg.resync_every = self.resync_every;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run settings serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub score: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            center_x_m: d.center_x_m,
            center_y_m: d.center_y_m,
            width_m: d.width_m,
            height_m: d.height_m,
            score: d.score,
        }
    }
}

impl DetectionRecord {
    pub fn to_detection(&self) -> Result<Detection> {
        Ok(Detection::new(self.center_x_m, self.center_y_m, self.width_m, self.height_m, self.score)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    /// `full`, `uniform` or `adaptive`.
    pub kind: String,
    pub total: usize,
    pub target_budget: usize,
    pub important_blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x2: Option<f64>,
    #[serde(default)]
    pub relaxed: bool,
    #[serde(default)]
    pub binding: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub variant: String,
    /// 240-bit bitmap, linear block order, LSB first, as hex.
    pub bitmap: String,
    pub blocks: usize,
    pub source_detections: Vec<DetectionRecord>,
}

/// Finite metrics as numbers; NaN and infinities become null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nmse: Option<f64>,
    pub psnr_db: Option<f64>,
    pub ap50: f64,
    pub ap: f64,
    pub box_nmse: Option<f64>,
    pub n_detections: usize,
    pub n_truth: usize,
}

impl From<&MetricBundle> for MetricsRecord {
    fn from(m: &MetricBundle) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            nmse: finite(m.nmse),
            psnr_db: finite(m.psnr_db),
            ap50: m.ap50,
            ap: m.ap,
            box_nmse: finite(m.box_nmse),
            n_detections: m.n_detections,
            n_truth: m.n_truth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub solved_blocks: usize,
    pub unconverged_blocks: usize,
    pub total_iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_id: u64,
    pub plan: PlanSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskReport>,
    pub detections: Vec<DetectionRecord>,
    pub detection_warning: bool,
    pub metrics: MetricsRecord,
    pub convergence: ConvergenceSummary,
}

impl FrameReport {
    pub fn from_record(r: &FrameRecord) -> Self {
        let (kind, x1, x2, relaxed, binding) = match &r.plan.kind {
            PlanKind::Full => ("full", None, None, false, Vec::new()),
            PlanKind::Uniform => ("uniform", Some(r.plan.rates()[0]), Some(r.plan.rates()[0]), false, Vec::new()),
            PlanKind::Adaptive { solution, relaxed } => (
                "adaptive",
                Some(solution.x1),
                Some(solution.x2),
                *relaxed,
                solution.binding.iter().map(|c| c.to_string()).collect(),
            ),
        };
        let c = &r.convergence;
        Self {
            frame_id: r.frame_id,
            plan: PlanSummary {
                kind: kind.to_string(),
                total: r.plan.total(),
                target_budget: r.plan.target_budget(),
                important_blocks: r.plan.important().len(),
                x1,
                x2,
                relaxed,
                binding,
            },
            mask: r.mask_used.as_ref().map(|m| MaskReport {
                variant: m.variant.to_string(),
                bitmap: mask_hex(&m.important),
                blocks: m.len(),
                source_detections: m.source_detections.iter().map(DetectionRecord::from).collect(),
            }),
            detections: r.detections.iter().map(DetectionRecord::from).collect(),
            detection_warning: r.detection_warning,
            metrics: MetricsRecord::from(&r.metrics),
            convergence: ConvergenceSummary {
                solved_blocks: c.solved(),
                unconverged_blocks: c.unconverged(),
                total_iterations: c.total_iterations(),
                max_residual: c.blocks.iter().map(|b| b.residual).fold(0.0, f64::max),
            },
        }
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub frame_id: u64,
    pub metrics: MetricBundle,
    pub plan_total: usize,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        v.to_string()
    }
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

/// AP columns are scaled to percent.
pub fn metrics_csv(rows: &[MetricsRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "frame_id",
        "nmse",
        "psnr_db",
        "ap50",
        "ap",
        "n_detections",
        "n_truth",
        "plan_total_m",
        "box_nmse",
    ])
    .expect("write to memory");
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.frame_id.to_string(),
            fmt_f64(m.nmse),
            fmt_f64(m.psnr_db),
            fmt_f64(100.0 * m.ap50),
            fmt_f64(100.0 * m.ap),
            m.n_detections.to_string(),
            m.n_truth.to_string(),
            r.plan_total.to_string(),
            fmt_f64(m.box_nmse),
        ])
        .expect("write to memory");
    }
    let mean = |f: &dyn Fn(&MetricsRow) -> f64| fmt_f64(finite_mean(rows.iter().map(f)));
    w.write_record([
        "mean".to_string(),
        mean(&|r| r.metrics.nmse),
        mean(&|r| r.metrics.psnr_db),
        mean(&|r| 100.0 * r.metrics.ap50),
        mean(&|r| 100.0 * r.metrics.ap),
        mean(&|r| r.metrics.n_detections as f64),
        mean(&|r| r.metrics.n_truth as f64),
        mean(&|r| r.plan_total as f64),
        mean(&|r| r.metrics.box_nmse),
    ])
    .expect("write to memory");
    w.into_inner().expect("flush to memory")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scene_name: String,
    pub frames: usize,
    pub mean_nmse: Option<f64>,
    pub mean_psnr_db: Option<f64>,
    pub mean_ap50: Option<f64>,
    pub mean_ap: Option<f64>,
    pub mean_box_nmse: Option<f64>,
    pub total_measurements: usize,
    pub unconverged_blocks: usize,
    pub detection_warnings: usize,
}

fn frame_stem(frame_id: u64) -> String {
    format!("frame_{frame_id:04}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Write `run` under `out`, creating the directory if needed.
pub fn write_report(out: &Path, settings: &RunSettings, scene: &Scene, run: &SceneRun) -> Result<()> {
    let frames_dir = out.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir).map_err(Error::io(&frames_dir))?;
    write_file(&out.join(RUN_FILE), settings.to_toml().as_bytes())?;

    let mut rows = Vec::with_capacity(run.records.len());
    for r in &run.records {
        let stem = frame_stem(r.frame_id);
        let path = |ext: &str| frames_dir.join(format!("{stem}.{ext}"));
        write_file(&path("rplan"), &PlanFile::from_plan(&r.plan).encode())?;
        write_file(&path("rmeas"), &encode_rmeas(&r.measurements))?;
        write_radf(&path("radf"), r.reconstruction.data())?;
        write_file(&path("plan.csv"), &plan_csv(&r.plan))?;
        if let Some(mask) = &r.mask_used {
            write_file(&path("mask.csv"), &mask_csv(&mask.important))?;
        }
        let json = serde_json::to_vec_pretty(&FrameReport::from_record(r)).expect("frame report serializes");
        write_file(&path("json"), &json)?;
        rows.push(MetricsRow {
            frame_id: r.frame_id,
            metrics: r.metrics,
            plan_total: r.plan.total(),
        });
    }
    write_file(&out.join(METRICS_FILE), &metrics_csv(&rows))?;

    let a = &run.aggregate;
    let finite = |v: f64| v.is_finite().then_some(v);
    let summary = Summary {
        scene_name: scene.manifest.scene_name.clone(),
        frames: run.records.len(),
        mean_nmse: finite(a.nmse),
        mean_psnr_db: finite(a.psnr_db),
        mean_ap50: finite(100.0 * a.ap50),
        mean_ap: finite(100.0 * a.ap),
        mean_box_nmse: finite(a.box_nmse),
        total_measurements: a.total_measurements,
        unconverged_blocks: a.unconverged_blocks,
        detection_warnings: run.records.iter().filter(|r| r.detection_warning).count(),
    };
    let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    write_file(&out.join(SUMMARY_FILE), &json)
}

/// Recompute `metrics.csv` from a stored report, its scene and the stored
/// reconstructions and detections.
pub fn evaluate_report(report: &Path) -> Result<Vec<u8>> {
    let settings = RunSettings::read(&report.join(RUN_FILE))?;
    let scene = Scene::load(&settings.scene)?;
    let truth = group_annotations(scene.annotation_boxes().iter().copied());
    let frames_dir = report.join(FRAMES_DIR);

    let mut reports = Vec::new();
    for entry in fs::read_dir(&frames_dir).map_err(Error::io(&frames_dir))? {
        let path = entry.map_err(Error::io(&frames_dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let bytes = fs::read(&path).map_err(Error::io(&path))?;
            let fr: FrameReport = serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))?;
            reports.push(fr);
        }
    }
    reports.sort_by_key(|r| r.frame_id);
    if reports.is_empty() {
        return Err(Error::format(&frames_dir, "report holds no frames"));
    }

    let mut rows = Vec::with_capacity(reports.len());
    for fr in &reports {
        let stem = frame_stem(fr.frame_id);
        let original = scene
            .frames
            .iter()
            .find(|f| f.frame_id == fr.frame_id)
            .ok_or_else(|| Error::format(&frames_dir, format!("frame {} is not part of the scene", fr.frame_id)))?;
        let rec = read_frame(&frames_dir.join(format!("{stem}.radf")), fr.frame_id, original.timestamp_s)?;
        let plan_path = frames_dir.join(format!("{stem}.rplan"));
        let plan_bytes = fs::read(&plan_path).map_err(Error::io(&plan_path))?;
        let plan = PlanFile::decode(&plan_bytes).map_err(|m| Error::format(&plan_path, m))?;
        let dets = fr
            .detections
            .iter()
            .map(DetectionRecord::to_detection)
            .collect::<Result<Vec<_>>>()?;
        let metrics = frame_metrics(
            original,
            &rec,
            &scored(&dets),
            &truth_boxes(&truth, fr.frame_id),
            &scene.geometry,
        )?;
        rows.push(MetricsRow {
            frame_id: fr.frame_id,
            metrics,
            plan_total: plan.total(),
        });
    }
    Ok(metrics_csv(&rows))
}
