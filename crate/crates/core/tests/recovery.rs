use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use radcs_core::cs::{build_measurement_matrix, reconstruct_block, reconstruct_frame, sense_block, sense_frame, BpSolverConfig, SparsityBasis};
use radcs_core::geometry::{BlockIndex, BlockSet, PolarFrame, BLOCK_LEN};
use radcs_core::lp::adaptive_plan;
use radcs_core::synthetic::{generate_synthetic_scene, SyntheticSceneSpec, TargetTrack};

fn sparse_block(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut s = vec![0.0; BLOCK_LEN];
    let mut placed = 0;
    while placed < k {
        let i = rng.random_range(0..BLOCK_LEN);
        if s[i] == 0.0 {
            s[i] = StandardNormal.sample(rng);
            placed += 1;
        }
    }
    SparsityBasis::new().inverse(&s)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    (num / den).sqrt()
}

fn recover(x: &[f64], seed: u64, m: usize) -> f64 {
    let phi = build_measurement_matrix(seed, 1, BlockIndex::new(7, 5).unwrap(), m).unwrap();
    let meas = sense_block(x, &phi).unwrap();
    let rec = reconstruct_block(&meas, &BpSolverConfig::default()).unwrap();
    rel_err(&rec.values, x)
}

#[test]
fn error_shrinks_with_more_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let blocks: Vec<Vec<f64>> = (0..20).map(|_| sparse_block(&mut rng, 12)).collect();
    let mut prev = f64::INFINITY;
    for m in [36, 72, 144, 288] {
        let mean = blocks
            .iter()
            .enumerate()
            .map(|(i, x)| recover(x, i as u64, m))
            .sum::<f64>()
            / blocks.len() as f64;
        assert!(mean <= prev, "mean error {mean} at m = {m} exceeds {prev}");
        prev = mean;
    }
    assert!(prev < 1e-3);
}

#[test]
fn six_k_measurements_recover_moderately_sparse_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let k = 32;
    let ok = (0..100)
        .filter(|&t| recover(&sparse_block(&mut rng, k), t, 6 * k) < 1e-3)
        .count();
    assert!(ok >= 95, "{ok} of 100 recovered");
}

#[test]
fn reconstruction_is_bit_identical() {
    let target = TargetTrack {
        start_x_m: -20.0,
        start_y_m: 30.0,
        velocity_x_mps: 2.0,
        velocity_y_mps: 0.0,
        width_m: 4.5,
        height_m: 1.9,
        amplitude: 0.8,
    };
    let mut spec = SyntheticSceneSpec::new(vec![target], 2, 5);
    spec.noise_level = 0.01;
    let scene = generate_synthetic_scene(&spec).unwrap();
    let frame: &PolarFrame = &scene.frames[1];
    let mut mask = BlockSet::new();
    mask.insert(BlockIndex::new(16, 4).unwrap());
    let plan = adaptive_plan(&mask, 0.1).unwrap();
    let cfg = BpSolverConfig {
        max_iterations: 50,
        ..BpSolverConfig::default()
    };
    let a = reconstruct_frame(&sense_frame(frame, &plan, 3).unwrap(), &cfg).unwrap();
    let b = reconstruct_frame(&sense_frame(frame, &plan, 3).unwrap(), &cfg).unwrap();
    let bits = |f: &PolarFrame| f.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.frame), bits(&b.frame));
    assert_eq!(a.report, b.report);
}
