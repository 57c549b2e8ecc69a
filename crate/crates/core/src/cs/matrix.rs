use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{BlockIndex, BLOCK_LEN};

/// Keyed random stream for one measurement matrix.
///
/// The ChaCha20 key is the 32-byte string
/// `seed (u64 LE) | frame_id (u64 LE) | linear block (u32 LE) | m (u32 LE) | b"radcsphi"`,
/// so every (seed, frame, block, m) tuple gets an independent stream and
/// partial re-runs draw the same matrices as full runs.
pub fn measurement_rng(seed: u64, frame_id: u64, block: BlockIndex, m: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&frame_id.to_le_bytes());
    key[16..20].copy_from_slice(&(block.linear() as u32).to_le_bytes());
    key[20..24].copy_from_slice(&(m as u32).to_le_bytes());
    key[24..].copy_from_slice(b"radcsphi");
    ChaCha20Rng::from_seed(key)
}

/// Dense i.i.d. N(0, 1/m) sensing matrix for one block of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub seed: u64,
    pub frame_id: u64,
    pub block: BlockIndex,
    entries: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `phi * x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != BLOCK_LEN {
            return Err(Error::Shape {
                expected: BLOCK_LEN,
                actual: x.len(),
            });
        }
        let y = &self.entries * DVector::from_column_slice(x);
        Ok(y.data.into())
    }
}

/// Deterministically draw the sensing matrix for `(seed, frame_id, block, m)`.
///
/// Entries are generated row by row from [`measurement_rng`].
pub fn build_measurement_matrix(seed: u64, frame_id: u64, block: BlockIndex, m: usize) -> Result<MeasurementMatrix> {
    block.validate()?;
    if m == 0 || m > BLOCK_LEN {
        return Err(Error::Parameter(alloc::format!(
            "measurement count must be in 1..=960, got {m}"
        )));
    }
    let mut rng = measurement_rng(seed, frame_id, block, m);
    let scale = 1.0 / libm::sqrt(m as f64);
    let values: Vec<f64> = (0..m * BLOCK_LEN)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    Ok(MeasurementMatrix {
        seed,
        frame_id,
        block,
        entries: DMatrix::from_row_slice(m, BLOCK_LEN, &values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(a: usize, r: usize) -> BlockIndex {
        BlockIndex::new(a, r).unwrap()
    }

    #[test]
    fn deterministic() {
        let a = build_measurement_matrix(7, 3, idx(4, 5), 96).unwrap();
        let b = build_measurement_matrix(7, 3, idx(4, 5), 96).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (96, 960));
    }

    #[test]
    fn distinct_keys_give_distinct_matrices() {
        let base = build_measurement_matrix(7, 3, idx(4, 5), 96).unwrap();
        for other in [
            build_measurement_matrix(7, 3, idx(4, 6), 96).unwrap(),
            build_measurement_matrix(7, 4, idx(4, 5), 96).unwrap(),
            build_measurement_matrix(8, 3, idx(4, 5), 96).unwrap(),
        ] {
            let same = base
                .entries()
                .iter()
                .zip(other.entries().iter())
                .filter(|(a, b)| a == b)
                .count();
            assert!(same < 10);
        }
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(build_measurement_matrix(1, 1, idx(0, 0), 0).is_err());
        assert!(build_measurement_matrix(1, 1, idx(0, 0), 961).is_err());
        assert!(build_measurement_matrix(1, 1, idx(0, 0), 960).is_ok());
    }

    #[test]
    fn columns_have_unit_expected_norm() {
        for m in [64, 96, 288] {
            let phi = build_measurement_matrix(11, 1, idx(2, 2), m).unwrap();
            let mut mean = 0.0;
            for col in phi.entries().column_iter() {
                let n = col.norm();
                assert!((0.7..=1.3).contains(&n), "column norm {n} at m={m}");
                mean += n * n;
            }
            mean /= 960.0;
            assert!((mean - 1.0).abs() < 0.05);
        }
    }
}
