use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::geometry::{BlockGeometry, BLOCK_LEN};

/// Orthonormal DCT-II matrix, row `k` holds basis function `k`.
fn dct_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 { libm::sqrt(1.0 / nf) } else { libm::sqrt(2.0 / nf) };
        scale * libm::cos(core::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf))
    })
}

/// Separable orthonormal 2-D DCT-II over a 20x48 block.
///
/// Vectors are row-major 20x48 blocks on both sides: `forward` maps pixels
/// to coefficients `C20 X C48^T`, `inverse` maps back.
#[derive(Debug, Clone)]
pub struct SparsityBasis {
    c_az: DMatrix<f64>,
    c_az_t: DMatrix<f64>,
    c_range: DMatrix<f64>,
    c_range_t: DMatrix<f64>,
}

impl Default for SparsityBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl SparsityBasis {
    pub fn new() -> Self {
        let c_az = dct_matrix(BlockGeometry::HEIGHT);
        let c_range = dct_matrix(BlockGeometry::WIDTH);
        Self {
            c_az_t: c_az.transpose(),
            c_range_t: c_range.transpose(),
            c_az,
            c_range,
        }
    }

    pub fn forward(&self, pixels: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; BLOCK_LEN];
        self.forward_into(pixels, &mut out);
        out
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; BLOCK_LEN];
        self.inverse_into(coeffs, &mut out);
        out
    }

    // A row-major 20x48 buffer read column-major is its 48x20 transpose, so
    // both transforms run on transposed views without copying:
    //   S^T = C48 X^T C20^T,   X^T = C48^T S^T C20.

    pub fn forward_into(&self, pixels: &[f64], out: &mut [f64]) {
        self.apply(&self.c_range, &self.c_az_t, pixels, out);
    }

    pub fn inverse_into(&self, coeffs: &[f64], out: &mut [f64]) {
        self.apply(&self.c_range_t, &self.c_az, coeffs, out);
    }

    fn apply(&self, left: &DMatrix<f64>, right: &DMatrix<f64>, input: &[f64], out: &mut [f64]) {
        let (w, h) = (BlockGeometry::WIDTH, BlockGeometry::HEIGHT);
        let x_t = DMatrixView::from_slice(input, w, h);
        let tmp = left * x_t;
        let mut dst = DMatrixViewMut::from_slice(out, w, h);
        dst.gemm(1.0, &tmp, right, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        libm::sqrt(v.iter().map(|x| x * x).sum())
    }

    #[test]
    fn round_trip_and_parseval() {
        let basis = SparsityBasis::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..BLOCK_LEN).map(|_| rng.random_range(-10.0..10.0)).collect();
            let s = basis.forward(&x);
            let back = basis.inverse(&s);
            let err: Vec<f64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
            assert!(norm(&err) / norm(&x) < 1e-10);
            assert!((norm(&s) - norm(&x)).abs() / norm(&x) < 1e-10);
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let basis = SparsityBasis::new();
        let s = basis.forward(&[1.0; BLOCK_LEN]);
        assert!((s[0] - libm::sqrt(BLOCK_LEN as f64)).abs() < 1e-10);
        assert!(s[1..].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn separable_layout_matches_direct_sum() {
        // coefficient (k, l) of a row-major block is stored at k * 48 + l
        let basis = SparsityBasis::new();
        let x: Vec<f64> = (0..BLOCK_LEN).map(|i| ((i * 37) % 11) as f64).collect();
        let s = basis.forward(&x);
        let c = |n: usize, k: usize, i: usize| {
            let scale = if k == 0 { libm::sqrt(1.0 / n as f64) } else { libm::sqrt(2.0 / n as f64) };
            scale * libm::cos(core::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n as f64))
        };
        for &(k, l) in &[(0, 0), (3, 7), (19, 47), (1, 0)] {
            let mut acc = 0.0;
            for i in 0..20 {
                for j in 0..48 {
                    acc += c(20, k, i) * c(48, l, j) * x[i * 48 + j];
                }
            }
            assert!((acc - s[k * 48 + l]).abs() < 1e-9);
        }
    }
}
