//! Per-block compressed sensing and frame assembly.

mod basis;
mod matrix;
mod solver;

pub use basis::SparsityBasis;
pub use matrix::{build_measurement_matrix, measurement_rng, MeasurementMatrix};
pub use solver::{basis_pursuit, BpSolution, BpSolverConfig, SensingOperator};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{extract_block, BlockIndex, BlockVector, PolarFrame, BLOCK_LEN, N_BLOCKS};
use crate::lp::SamplingPlan;

/// Compressed (or raw) samples of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeasurement {
    pub block: BlockIndex,
    pub frame_id: u64,
    pub seed: u64,
    /// Number of stored values; 960 means the block was stored raw.
    pub m: usize,
    pub values: Vec<f64>,
}

impl BlockMeasurement {
    pub fn is_raw(&self) -> bool {
        self.m == BLOCK_LEN
    }

    /// Regenerate the sensing matrix used for this block.
    pub fn matrix(&self) -> Result<MeasurementMatrix> {
        build_measurement_matrix(self.seed, self.frame_id, self.block, self.m)
    }
}

/// Solver outcome for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSolveInfo {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReconstruction {
    pub values: BlockVector,
    pub info: BlockSolveInfo,
}

/// `y = phi x`.
pub fn sense_block(block: &[f64], phi: &MeasurementMatrix) -> Result<BlockMeasurement> {
    let values = phi.apply(block)?;
    Ok(BlockMeasurement {
        block: phi.block,
        frame_id: phi.frame_id,
        seed: phi.seed,
        m: phi.rows(),
        values,
    })
}

/// Recover a block by basis pursuit in the DCT domain.
pub fn reconstruct_block(meas: &BlockMeasurement, config: &BpSolverConfig) -> Result<BlockReconstruction> {
    reconstruct_block_with(meas, &SparsityBasis::new(), config)
}

pub fn reconstruct_block_with(
    meas: &BlockMeasurement,
    basis: &SparsityBasis,
    config: &BpSolverConfig,
) -> Result<BlockReconstruction> {
    config.validate()?;
    if meas.values.len() != meas.m {
        return Err(Error::Shape {
            expected: meas.m,
            actual: meas.values.len(),
        });
    }
    if meas.is_raw() {
        return Ok(BlockReconstruction {
            values: meas.values.clone(),
            info: BlockSolveInfo {
                converged: true,
                iterations: 0,
                residual: 0.0,
            },
        });
    }
    if meas.values.iter().all(|&v| v == 0.0) {
        return Ok(BlockReconstruction {
            values: vec![0.0; BLOCK_LEN],
            info: BlockSolveInfo {
                converged: true,
                iterations: 0,
                residual: 0.0,
            },
        });
    }
    let phi = meas.matrix()?;
    let op = SensingOperator::new(&phi, basis)?;
    let sol = basis_pursuit(&op, &meas.values, config);
    Ok(BlockReconstruction {
        values: basis.inverse(&sol.coefficients),
        info: BlockSolveInfo {
            converged: sol.converged,
            iterations: sol.iterations,
            residual: sol.residual,
        },
    })
}

/// Samples of every block of one frame, in linear block order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeasurements {
    pub frame_id: u64,
    pub timestamp_s: f64,
    pub seed: u64,
    pub blocks: Vec<BlockMeasurement>,
}

impl FrameMeasurements {
    /// Stored values across all blocks.
    pub fn total_values(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.m).collect()
    }
}

fn sense_one(frame: &PolarFrame, idx: BlockIndex, m: usize, seed: u64) -> Result<BlockMeasurement> {
    if m == 0 || m > BLOCK_LEN {
        return Err(Error::Plan(alloc::format!("block {idx} has {m} measurements")));
    }
    let x = extract_block(frame, idx)?;
    let values = if m == BLOCK_LEN {
        x
    } else if x.iter().all(|&v| v == 0.0) {
        // phi * 0 without drawing phi
        vec![0.0; m]
    } else {
        // rounded to the f32 precision they are stored at
        let mut y = build_measurement_matrix(seed, frame.frame_id, idx, m)?.apply(&x)?;
        for v in y.iter_mut() {
            *v = *v as f32 as f64;
        }
        y
    };
    Ok(BlockMeasurement {
        block: idx,
        frame_id: frame.frame_id,
        seed,
        m,
        values,
    })
}

#[cfg(feature = "rayon")]
fn map_blocks<T: Send>(f: impl Fn(BlockIndex) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..N_BLOCKS)
        .into_par_iter()
        .map(|i| f(BlockIndex::from_linear(i).expect("linear index in range")))
        .collect()
}

#[cfg(not(feature = "rayon"))]
fn map_blocks<T>(f: impl Fn(BlockIndex) -> T) -> Vec<T> {
    BlockIndex::all().map(f).collect()
}

/// Sense every block of `frame` with the per-block counts of `plan`.
/// Blocks planned at 960 samples are stored raw.
pub fn sense_frame(frame: &PolarFrame, plan: &SamplingPlan, seed: u64) -> Result<FrameMeasurements> {
    let counts = plan.counts();
    if counts.len() != N_BLOCKS {
        return Err(Error::Plan(alloc::format!("plan covers {} blocks", counts.len())));
    }
    let blocks = map_blocks(|idx| sense_one(frame, idx, counts[idx.linear()], seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameMeasurements {
        frame_id: frame.frame_id,
        timestamp_s: frame.timestamp_s,
        seed,
        blocks,
    })
}

/// Per-frame summary of block solver outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub blocks: Vec<BlockSolveInfo>,
}

impl ConvergenceReport {
    pub fn unconverged(&self) -> usize {
        self.blocks.iter().filter(|b| !b.converged).count()
    }

    pub fn total_iterations(&self) -> usize {
        self.blocks.iter().map(|b| b.iterations).sum()
    }

    /// Blocks that actually ran the solver.
    pub fn solved(&self) -> usize {
        self.blocks.iter().filter(|b| b.iterations > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReconstruction {
    pub frame: PolarFrame,
    pub report: ConvergenceReport,
}

/// Reassemble a frame from its block measurements. Recovered intensities
/// are clamped to be non-negative before storage.
pub fn reconstruct_frame(meas: &FrameMeasurements, config: &BpSolverConfig) -> Result<FrameReconstruction> {
    config.validate()?;
    if meas.blocks.len() != N_BLOCKS {
        return Err(Error::Plan(alloc::format!(
            "measurements cover {} blocks",
            meas.blocks.len()
        )));
    }
    let basis = SparsityBasis::new();
    let results = map_blocks(|idx| {
        let b = &meas.blocks[idx.linear()];
        if b.block != idx {
            return Err(Error::Plan(alloc::format!("block {} stored at slot {idx}", b.block)));
        }
        reconstruct_block_with(b, &basis, config)
    });
    let mut frame = PolarFrame::zeros(meas.frame_id, meas.timestamp_s);
    let mut infos = Vec::with_capacity(N_BLOCKS);
    for (idx, res) in BlockIndex::all().zip(results) {
        let mut rec = res?;
        for v in rec.values.iter_mut() {
            if !(v.is_finite() && *v > 0.0) {
                *v = 0.0;
            }
        }
        frame.set_block(idx, &rec.values)?;
        infos.push(rec.info);
    }
    Ok(FrameReconstruction {
        frame,
        report: ConvergenceReport { blocks: infos },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn idx(a: usize, r: usize) -> BlockIndex {
        BlockIndex::new(a, r).unwrap()
    }

    fn sparse_block(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let mut s = vec![0.0; BLOCK_LEN];
        let mut placed = 0;
        while placed < k {
            let i = rng.random_range(0..BLOCK_LEN);
            if s[i] == 0.0 {
                let v: f64 = StandardNormal.sample(rng);
                s[i] = v;
                placed += 1;
            }
        }
        SparsityBasis::new().inverse(&s)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|x| x * x).sum();
        libm::sqrt(num / den)
    }

    #[test]
    fn sense_zero_block_is_zero() {
        let phi = build_measurement_matrix(1, 1, idx(0, 0), 96).unwrap();
        let meas = sense_block(&[0.0; BLOCK_LEN], &phi).unwrap();
        assert_eq!(meas.values, vec![0.0; 96]);
    }

    #[test]
    fn sense_unit_vector_returns_column() {
        let phi = build_measurement_matrix(1, 1, idx(0, 0), 96).unwrap();
        let mut e = vec![0.0; BLOCK_LEN];
        e[17] = 1.0;
        let meas = sense_block(&e, &phi).unwrap();
        let col: Vec<f64> = phi.entries().column(17).iter().copied().collect();
        assert_eq!(meas.values, col);
    }

    #[test]
    fn sense_is_linear() {
        let phi = build_measurement_matrix(3, 2, idx(5, 5), 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x1: Vec<f64> = (0..BLOCK_LEN).map(|_| rng.random_range(0.0..5.0)).collect();
        let x2: Vec<f64> = (0..BLOCK_LEN).map(|_| rng.random_range(0.0..5.0)).collect();
        let (a, b) = (2.5, -0.75);
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let y1 = sense_block(&x1, &phi).unwrap().values;
        let y2 = sense_block(&x2, &phi).unwrap().values;
        let ym = sense_block(&mix, &phi).unwrap().values;
        for i in 0..128 {
            assert!((ym[i] - (a * y1[i] + b * y2[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn sense_rejects_wrong_length() {
        let phi = build_measurement_matrix(1, 1, idx(0, 0), 96).unwrap();
        assert!(matches!(sense_block(&[0.0; 10], &phi), Err(Error::Shape { .. })));
    }

    #[test]
    fn measurement_norm_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for t in 0..100u64 {
            let phi = build_measurement_matrix(t, 1, idx(1, 1), 96).unwrap();
            let x: Vec<f64> = (0..BLOCK_LEN).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y = sense_block(&x, &phi).unwrap().values;
            let ratio = libm::sqrt(y.iter().map(|v| v * v).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>());
            assert!((0.7..=1.3).contains(&ratio), "trial {t}: ratio {ratio}");
        }
    }

    #[test]
    fn zero_measurement_recovers_zero() {
        let meas = BlockMeasurement {
            block: idx(0, 0),
            frame_id: 1,
            seed: 1,
            m: 96,
            values: vec![0.0; 96],
        };
        let rec = reconstruct_block(&meas, &BpSolverConfig::default()).unwrap();
        assert_eq!(rec.values, vec![0.0; BLOCK_LEN]);
        assert!(rec.info.converged);
    }

    #[test]
    fn sparse_block_recovered_at_30_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let x = sparse_block(&mut rng, 10);
        let phi = build_measurement_matrix(42, 1, idx(3, 4), 288).unwrap();
        let meas = sense_block(&x, &phi).unwrap();
        let rec = reconstruct_block(&meas, &BpSolverConfig::default()).unwrap();
        assert!(rec.info.converged);
        assert!(rel_err(&rec.values, &x) < 1e-3, "error {}", rel_err(&rec.values, &x));
        assert!(rec.info.residual <= 1e-5);
    }

    #[test]
    fn fully_determined_system_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = sparse_block(&mut rng, 10);
        // m = 960 is stored raw by the frame path; run the solver directly.
        let phi = build_measurement_matrix(42, 1, idx(3, 4), 960).unwrap();
        let y = phi.apply(&x).unwrap();
        let basis = SparsityBasis::new();
        let op = SensingOperator::new(&phi, &basis).unwrap();
        let sol = basis_pursuit(&op, &y, &BpSolverConfig::default());
        let rec = basis.inverse(&sol.coefficients);
        assert!(rel_err(&rec, &x) < 1e-6);
    }

    #[test]
    fn raw_block_round_trips() {
        let meas = BlockMeasurement {
            block: idx(0, 0),
            frame_id: 1,
            seed: 1,
            m: 960,
            values: (0..960).map(|i| i as f64).collect(),
        };
        let rec = reconstruct_block(&meas, &BpSolverConfig::default()).unwrap();
        assert_eq!(rec.values, meas.values);
    }

    #[test]
    fn bad_solver_config_rejected() {
        let cfg = BpSolverConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = BpSolverConfig {
            relaxation: 2.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
