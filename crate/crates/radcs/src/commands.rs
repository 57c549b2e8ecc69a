//! The work behind each `radcs` subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use radcs_core::geometry::ScanConverter;
use radcs_core::lp::{solve_rates_relaxed, BudgetLp};
use radcs_core::pipeline::{run_scene, SceneRun};
use radcs_core::detector::group_annotations;
use radcs_core::synthetic::{
    generate_synthetic_scene, random_scene_spec, RandomSceneParams, SyntheticSceneSpec, TargetTrack,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::encode_radf;
use crate::report::{rate_from_percent, write_report, RunSettings};
use crate::scene::{annotations_jsonl, write_scene, Scene, SceneManifest};

/// Load the scene, run the loop and write the report directory.
pub fn run(settings: &RunSettings, out: &Path) -> Result<SceneRun> {
    let scene = Scene::load(&settings.scene)?;
    let mut settings = settings.clone();
    settings.scene = scene.dir.clone();
    let cfg = settings.scene_config(&scene)?;
    let truth = group_annotations(scene.annotation_boxes().iter().copied());
    let run = run_scene(&scene.frames, &truth, &cfg)?;
    write_report(out, &settings, &scene, &run)?;
    Ok(run)
}

/// Human-readable solution of the rate LP.
pub fn lp_report(important: usize, rate_percent: u32) -> Result<String> {
    if important > radcs_core::geometry::N_BLOCKS {
        return Err(Error::Config(format!("--important must lie in 0..=240, got {important}")));
    }
    let rate = rate_from_percent(rate_percent)?;
    let lp = BudgetLp::for_rate(important, rate)?;
    let (sol, relaxed) = solve_rates_relaxed(&lp)?;
    let b = &lp.bounds;
    let mut s = String::new();
    let _ = writeln!(s, "rate        {rate_percent}%");
    let _ = writeln!(s, "budget S    {}", lp.budget);
    let _ = writeln!(s, "important I {}", lp.important);
    let _ = writeln!(s, "other O     {}", lp.other);
    let _ = writeln!(
        s,
        "bounds      x1 in [{}, {}], x2 in [{}, {}]",
        b.x1_lower, b.x1_upper, b.x2_lower, b.x2_upper
    );
    let _ = writeln!(s, "x1          {}", sol.x1);
    let _ = writeln!(s, "x2          {}", sol.x2);
    let _ = writeln!(s, "achieved    {}", sol.achieved_budget);
    let binding: Vec<String> = sol.binding.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "binding     {}", if binding.is_empty() { "none".into() } else { binding.join(", ") });
    if relaxed {
        let _ = writeln!(
            s,
            "relaxation  applied: x1 lower bound lowered to {} (1.1 x {})",
            (lp.ratio * b.x2_lower).min(b.x1_upper),
            b.x2_lower
        );
    } else {
        let _ = writeln!(s, "relaxation  none");
    }
    if !sol.feasible {
        let _ = writeln!(
            s,
            "infeasible  {}",
            sol.violated.map(|c| c.to_string()).unwrap_or_default()
        );
    }
    Ok(s)
}

/// One entry of a target file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default)]
    pub vx_mps: f64,
    #[serde(default)]
    pub vy_mps: f64,
    pub width_m: f64,
    pub height_m: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

/// ```toml
/// noise_level = 0.0
/// [[target]]
/// x_m = 5.0
/// y_m = 40.0
/// vy_mps = 4.0
/// width_m = 1.9
/// height_m = 4.5
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetFile {
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub texture: f64,
    #[serde(default, rename = "target")]
    pub targets: Vec<TargetEntry>,
}

impl TargetFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn scene_spec(&self, n_frames: usize, seed: u64) -> SyntheticSceneSpec {
        let targets = self
            .targets
            .iter()
            .map(|t| TargetTrack {
                start_x_m: t.x_m,
                start_y_m: t.y_m,
                velocity_x_mps: t.vx_mps,
                velocity_y_mps: t.vy_mps,
                width_m: t.width_m,
                height_m: t.height_m,
                amplitude: t.amplitude,
            })
            .collect();
        let mut spec = SyntheticSceneSpec::new(targets, n_frames, seed);
        spec.noise_level = self.noise_level;
        spec.texture = self.texture;
        spec
    }
}

/// Where the targets of a generated scene come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    File(TargetFile),
    Random { count: usize, max_speed_mps: f64 },
}

pub fn gen_synthetic(source: &TargetSource, n_frames: usize, seed: u64, name: &str, weather: &str, out: &Path) -> Result<SceneManifest> {
    let spec = match source {
        TargetSource::File(f) => f.scene_spec(n_frames, seed),
        TargetSource::Random { count, max_speed_mps } => {
            let params = RandomSceneParams {
                max_speed_mps: *max_speed_mps,
                ..RandomSceneParams::new(*count, n_frames)
            };
            random_scene_spec(seed, &params)?
        }
    };
    let scene = generate_synthetic_scene(&spec)?;
    write_scene(out, name, weather, &scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneFrame {
    pub file: String,
    pub frame_id: u64,
    /// False for the raw first frame.
    pub subsampled: bool,
    pub plan_total_m: usize,
}

/// `dataset.toml` of one fine-tuning scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneIndex {
    pub scene_name: String,
    pub rate_percent: u32,
    /// Only 20% was used to build the published fine-tuning set.
    pub published_rate: bool,
    pub variant: String,
    pub seed: u64,
    pub side_px: usize,
    pub meters_per_pixel: f64,
    pub annotations: String,
    pub frames: Vec<FinetuneFrame>,
}

/// Sub-sampled Cartesian training frames. Frame k is planned from the
/// detections on the original frame k-1; frame 1 is stored raw.
/// Each scene lands in `out/<scene_name>/`.
pub fn gen_finetune_set(scene_dirs: &[PathBuf], template: &RunSettings, out: &Path) -> Result<Vec<FinetuneIndex>> {
    let scenes = scene_dirs.iter().map(|d| Scene::load(d)).collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = scenes.iter().map(|s| s.manifest.scene_name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("scene name '{}' appears twice", w[0])));
    }
    let mut indices = Vec::with_capacity(scenes.len());
    for scene in &scenes {
        let mut settings = template.clone();
        settings.scene = scene.dir.clone();
        settings.plan_from_original = true;
        let cfg = settings.scene_config(scene)?;
        let truth = group_annotations(scene.annotation_boxes().iter().copied());
        let run = run_scene(&scene.frames, &truth, &cfg)?;

        let dir = out.join(&scene.manifest.scene_name);
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let conv = ScanConverter::new(scene.geometry);
        let mut frames = Vec::with_capacity(run.records.len());
        for (k, r) in run.records.iter().enumerate() {
            let file = format!("frame_{:04}.rcart", r.frame_id);
            let cart = conv.convert(&r.reconstruction);
            let path = dir.join(&file);
            fs::write(&path, encode_radf(&cart.data)).map_err(Error::io(&path))?;
            frames.push(FinetuneFrame {
                file,
                frame_id: r.frame_id,
                subsampled: k > 0,
                plan_total_m: r.plan.total(),
            });
        }
        let ann_path = dir.join("annotations.jsonl");
        let kept: Vec<_> = scene
            .annotation_boxes()
            .iter()
            .copied()
            .filter(|b| run.records.iter().any(|r| r.frame_id == b.frame_id))
            .collect();
        fs::write(&ann_path, annotations_jsonl(&kept)).map_err(Error::io(&ann_path))?;
        let index = FinetuneIndex {
            scene_name: scene.manifest.scene_name.clone(),
            rate_percent: settings.rate_percent,
            published_rate: settings.rate_percent == 20,
            variant: settings.variant.clone(),
            seed: settings.seed,
            side_px: conv.side(),
            meters_per_pixel: conv.meters_per_pixel(),
            annotations: "annotations.jsonl".into(),
            frames,
        };
        let path = dir.join("dataset.toml");
        let text = toml::to_string(&index).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text).map_err(Error::io(&path))?;
        indices.push(index);
    }
    Ok(indices)
}
