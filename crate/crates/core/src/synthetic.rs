//! Moving-target scenes rendered directly in polar coordinates.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::detector::GroundTruthBox;
use crate::error::{Error, Result};
use crate::geometry::{polar_bin_center_m, FrameGeometry, PolarFrame, FRAME_PERIOD_S, N_AZIMUTH, N_RANGE};

/// 80 mph.
pub const MAX_SPEED_MPS: f64 = 35.8;

/// Straight-line constant-velocity target with an axis-aligned footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTrack {
    pub start_x_m: f64,
    pub start_y_m: f64,
    pub velocity_x_mps: f64,
    pub velocity_y_mps: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub amplitude: f64,
}

impl TargetTrack {
    pub fn position(&self, t_s: f64) -> (f64, f64) {
        (
            self.start_x_m + self.velocity_x_mps * t_s,
            self.start_y_m + self.velocity_y_mps * t_s,
        )
    }

    pub fn speed(&self) -> f64 {
        libm::hypot(self.velocity_x_mps, self.velocity_y_mps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub targets: Vec<TargetTrack>,
    pub n_frames: usize,
    /// Mean of the exponential speckle background; 0 leaves it empty.
    pub noise_level: f64,
    /// Relative std of multiplicative speckle on target returns.
    pub texture: f64,
    /// Edge blur (Gaussian sigma) in meters.
    pub blur_m: f64,
    pub seed: u64,
    pub geometry: FrameGeometry,
}

impl SyntheticSceneSpec {
    pub fn new(targets: Vec<TargetTrack>, n_frames: usize, seed: u64) -> Self {
        Self {
            targets,
            n_frames,
            noise_level: 0.0,
            texture: 0.0,
            blur_m: 0.5,
            seed,
            geometry: FrameGeometry::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Scene(msg));
        if self.n_frames == 0 {
            return bad("scene needs at least one frame".into());
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise level must be non-negative".into());
        }
        if !(self.texture >= 0.0 && self.texture.is_finite()) {
            return bad("texture must be non-negative".into());
        }
        if !(self.blur_m > 0.0 && self.blur_m.is_finite()) {
            return bad("blur must be positive".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.width_m > 0.0 && t.height_m > 0.0 && t.width_m.is_finite() && t.height_m.is_finite()) {
                return bad(alloc::format!("target {i}: extents must be positive"));
            }
            if !(t.amplitude > 0.0 && t.amplitude.is_finite()) {
                return bad(alloc::format!("target {i}: amplitude must be positive"));
            }
            if !(t.speed() <= MAX_SPEED_MPS) {
                return bad(alloc::format!(
                    "target {i}: speed {:.2} m/s exceeds {MAX_SPEED_MPS} m/s",
                    t.speed()
                ));
            }
            for k in 0..self.n_frames {
                let (x, y) = t.position(k as f64 * FRAME_PERIOD_S);
                let r = libm::hypot(x, y);
                if !(r > 0.0 && r < self.geometry.max_range_m) {
                    return bad(alloc::format!(
                        "target {i} leaves the sensor disc in frame {} (range {r:.2} m)",
                        k + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub frames: Vec<PolarFrame>,
    /// Exact target rectangles; frame ids start at 1.
    pub annotations: Vec<GroundTruthBox>,
}

/// Fraction of a blurred interval `[a, b]` seen at `v`.
fn edge_profile(v: f64, a: f64, b: f64, sigma: f64) -> f64 {
    let s = sigma * core::f64::consts::SQRT_2;
    0.5 * (libm::erf((v - a) / s) - libm::erf((v - b) / s))
}

fn frame_rng(seed: u64, frame_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(frame_id);
    rng
}

/// Render every frame of the scene. Returns are evaluated at polar bin
/// centres and cut to zero beyond three blur widths of the rectangle.
pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let geom = &spec.geometry;
    let centers: Vec<(f64, f64)> = (0..N_AZIMUTH)
        .flat_map(|row| (0..N_RANGE).map(move |col| (row, col)))
        .map(|(row, col)| polar_bin_center_m(row, col, geom))
        .collect();
    let sigma = spec.blur_m;
    let margin = 3.0 * sigma;

    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut annotations = Vec::new();
    for k in 0..spec.n_frames {
        let frame_id = k as u64 + 1;
        let t = k as f64 * FRAME_PERIOD_S;
        let mut rng = frame_rng(spec.seed, frame_id);
        let mut data = vec![0.0f32; centers.len()];
        if spec.noise_level > 0.0 {
            for v in data.iter_mut() {
                let e: f64 = Exp1.sample(&mut rng);
                *v = (spec.noise_level * e) as f32;
            }
        }
        for target in &spec.targets {
            let (cx, cy) = target.position(t);
            let (hw, hh) = (target.width_m / 2.0, target.height_m / 2.0);
            let (x0, x1, y0, y1) = (cx - hw, cx + hw, cy - hh, cy + hh);
            for (i, &(x, y)) in centers.iter().enumerate() {
                if x < x0 - margin || x > x1 + margin || y < y0 - margin || y > y1 + margin {
                    continue;
                }
                let mut v = target.amplitude * edge_profile(x, x0, x1, sigma) * edge_profile(y, y0, y1, sigma);
                if spec.texture > 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    v *= (1.0 + spec.texture * g).max(0.0);
                }
                data[i] += v as f32;
            }
            annotations.push(GroundTruthBox {
                frame_id,
                center_x_m: cx,
                center_y_m: cy,
                width_m: target.width_m,
                height_m: target.height_m,
            });
        }
        frames.push(PolarFrame::new(frame_id, t, data)?);
    }
    Ok(SyntheticScene { frames, annotations })
}

/// Knobs for [`random_scene_spec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSceneParams {
    pub n_targets: usize,
    pub n_frames: usize,
    pub max_speed_mps: f64,
    pub min_range_m: f64,
    pub max_range_m: f64,
}

impl RandomSceneParams {
    pub fn new(n_targets: usize, n_frames: usize) -> Self {
        Self {
            n_targets,
            n_frames,
            max_speed_mps: 20.0,
            min_range_m: 20.0,
            max_range_m: 85.0,
        }
    }
}

/// Vehicle-like targets placed at random, moving slowly enough to stay on
/// the disc for the whole scene. A quarter of them are truck sized.
pub fn random_scene_spec(seed: u64, params: &RandomSceneParams) -> Result<SyntheticSceneSpec> {
    let p = params;
    if !(p.min_range_m > 0.0 && p.min_range_m < p.max_range_m && p.max_range_m < 95.0) {
        return Err(Error::Scene("random target ranges must satisfy 0 < min < max < 95 m".into()));
    }
    if !(p.max_speed_mps >= 0.0 && p.max_speed_mps <= MAX_SPEED_MPS) {
        return Err(Error::Scene(alloc::format!("random speed bound must lie in [0, {MAX_SPEED_MPS}]")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ce4e);
    let duration = p.n_frames.saturating_sub(1) as f64 * FRAME_PERIOD_S;
    let mut targets = Vec::with_capacity(p.n_targets);
    while targets.len() < p.n_targets {
        let range = rng.random_range(p.min_range_m..p.max_range_m);
        let bearing: f64 = rng.random_range(0.0..core::f64::consts::TAU);
        let speed = if p.max_speed_mps > 0.0 { rng.random_range(0.0..p.max_speed_mps) } else { 0.0 };
        let heading: f64 = rng.random_range(0.0..core::f64::consts::TAU);
        let (length, breadth) = if rng.random_bool(0.25) { (12.0, 2.5) } else { (4.5, 1.9) };
        let (width_m, height_m) = if rng.random_bool(0.5) { (length, breadth) } else { (breadth, length) };
        let track = TargetTrack {
            start_x_m: range * libm::sin(bearing),
            start_y_m: range * libm::cos(bearing),
            velocity_x_mps: speed * libm::sin(heading),
            velocity_y_mps: speed * libm::cos(heading),
            width_m,
            height_m,
            amplitude: rng.random_range(0.5..1.0),
        };
        let (ex, ey) = track.position(duration);
        let end = libm::hypot(ex, ey);
        if end > 15.0 && end < 90.0 {
            targets.push(track);
        }
    }
    Ok(SyntheticSceneSpec::new(targets, p.n_frames, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, y: f64, vx: f64, vy: f64) -> TargetTrack {
        TargetTrack {
            start_x_m: x,
            start_y_m: y,
            velocity_x_mps: vx,
            velocity_y_mps: vy,
            width_m: 1.9,
            height_m: 4.5,
            amplitude: 1.0,
        }
    }

    #[test]
    fn empty_scene_is_zero() {
        let scene = generate_synthetic_scene(&SyntheticSceneSpec::new(Vec::new(), 3, 1)).unwrap();
        assert_eq!(scene.frames.len(), 3);
        assert!(scene.frames.iter().all(|f| f.is_zero()));
        assert!(scene.annotations.is_empty());
        let ids: Vec<u64> = scene.frames.iter().map(|f| f.frame_id).collect();
        assert_eq!(ids, [1, 2, 3]);
        assert_eq!(scene.frames[2].timestamp_s, 0.5);
    }

    #[test]
    fn static_target_repeats() {
        let scene = generate_synthetic_scene(&SyntheticSceneSpec::new(vec![car(10.0, 40.0, 0.0, 0.0)], 4, 1)).unwrap();
        assert_eq!(scene.annotations.len(), 4);
        for a in &scene.annotations {
            assert_eq!((a.center_x_m, a.center_y_m, a.width_m, a.height_m), (10.0, 40.0, 1.9, 4.5));
        }
        assert_eq!(scene.frames[0].data(), scene.frames[3].data());
    }

    #[test]
    fn target_energy_is_local() {
        let geom = FrameGeometry::default();
        let scene = generate_synthetic_scene(&SyntheticSceneSpec::new(vec![car(0.0, 30.0, 0.0, 0.0)], 1, 1)).unwrap();
        let f = &scene.frames[0];
        let mut peak = (0.0f32, 0, 0);
        for row in 0..N_AZIMUTH {
            for col in 0..N_RANGE {
                let v = f.get(row, col);
                if v > 0.0 {
                    let (x, y) = polar_bin_center_m(row, col, &geom);
                    assert!((x.abs() - 0.95) <= 1.5 + 1e-9 && (y - 30.0).abs() <= 2.25 + 1.5 + 1e-9);
                }
                if v > peak.0 {
                    peak = (v, row, col);
                }
            }
        }
        assert!(peak.0 > 0.9);
        let (x, y) = polar_bin_center_m(peak.1, peak.2, &geom);
        assert!(libm::hypot(x, y - 30.0) < 2.5);
    }

    #[test]
    fn radial_motion_between_frames() {
        let scene = generate_synthetic_scene(&SyntheticSceneSpec::new(vec![car(0.0, 30.0, 0.0, 20.0)], 2, 1)).unwrap();
        let dy = scene.annotations[1].center_y_m - scene.annotations[0].center_y_m;
        assert!((dy - 5.0).abs() < 1e-12);
        assert!(dy < FrameGeometry::default().block_range_m());
    }

    #[test]
    fn invalid_specs() {
        let fast = SyntheticSceneSpec::new(vec![car(0.0, 30.0, 40.0, 0.0)], 2, 1);
        assert!(matches!(generate_synthetic_scene(&fast), Err(Error::Scene(_))));
        let leaving = SyntheticSceneSpec::new(vec![car(0.0, 95.0, 0.0, 30.0)], 20, 1);
        assert!(matches!(generate_synthetic_scene(&leaving), Err(Error::Scene(_))));
        let origin = SyntheticSceneSpec::new(vec![car(0.0, 0.0, 0.0, 0.0)], 1, 1);
        assert!(generate_synthetic_scene(&origin).is_err());
        assert!(generate_synthetic_scene(&SyntheticSceneSpec::new(Vec::new(), 0, 1)).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = SyntheticSceneSpec::new(vec![car(5.0, 50.0, 1.0, 0.0)], 2, 9);
        spec.noise_level = 0.05;
        spec.texture = 0.3;
        let a = generate_synthetic_scene(&spec).unwrap();
        let b = generate_synthetic_scene(&spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.frames[0].data(), a.frames[1].data());
        spec.seed = 10;
        assert_ne!(generate_synthetic_scene(&spec).unwrap().frames[0].data(), a.frames[0].data());
    }

    #[test]
    fn random_specs_are_valid() {
        for seed in 0..20 {
            let spec = random_scene_spec(seed, &RandomSceneParams::new(3, 20)).unwrap();
            assert_eq!(spec.targets.len(), 3);
            spec.validate().unwrap();
        }
        let slow = RandomSceneParams {
            max_speed_mps: 5.0,
            ..RandomSceneParams::new(4, 20)
        };
        let spec = random_scene_spec(1, &slow).unwrap();
        assert!(spec.targets.iter().all(|t| t.speed() <= 5.0));
        let bad = RandomSceneParams {
            min_range_m: 90.0,
            ..slow
        };
        assert!(random_scene_spec(1, &bad).is_err());
        for seed in 0..3 {
            let a = random_scene_spec(seed, &slow).unwrap();
            assert_eq!(a, random_scene_spec(seed, &slow).unwrap());
        }
    }
}
