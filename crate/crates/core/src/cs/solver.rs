//! Basis pursuit by ADMM in DCT-coefficient space.
//!
//! Solves `min ||s||_1  s.t.  A s = y` with `A = phi * inverse_dct`. The
//! s-update is an exact projection onto the affine set, which only needs a
//! Cholesky factor of `A A^T = phi phi^T` because the DCT is orthonormal.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::basis::SparsityBasis;
use super::matrix::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::geometry::BLOCK_LEN;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpSolverConfig {
    pub max_iterations: usize,
    /// Relative primal residual `||s - z|| / max(||s||, ||z||)`.
    pub primal_tolerance: f64,
    /// Relative dual residual `rho ||z - z_prev|| / ||rho u||`.
    pub dual_tolerance: f64,
    /// ADMM penalty, at the scale where coefficients have unit RMS.
    pub penalty: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
}

impl Default for BpSolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            primal_tolerance: 1e-5,
            dual_tolerance: 1e-5,
            penalty: 1.0,
            relaxation: 1.5,
        }
    }
}

impl BpSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(alloc::format!("solver {what}")));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.primal_tolerance > 0.0 && self.dual_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad("penalty must be positive");
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return bad("relaxation must lie in (0, 2)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution {
    /// DCT coefficients of the recovered block.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||A s - y|| / ||y||` of the returned coefficients.
    pub residual: f64,
}

/// `A = phi * inverse_dct` together with a factorization of `A A^T`.
///
/// Iterations project with `B = L^-1 A` (rows orthonormal, `L L^T = A A^T`)
/// held in single precision, which halves memory traffic; the final
/// projection goes through the exact double-precision path.
pub struct SensingOperator<'a> {
    phi: &'a MeasurementMatrix,
    basis: &'a SparsityBasis,
    gram: Cholesky<f64, Dyn>,
    /// Rows of `B`, each contiguous.
    b_rows: Vec<f32>,
}

impl<'a> SensingOperator<'a> {
    pub fn new(phi: &'a MeasurementMatrix, basis: &'a SparsityBasis) -> Result<Self> {
        let p = phi.entries();
        let gram = p * p.transpose();
        let gram = Cholesky::new(gram)
            .ok_or_else(|| Error::Parameter("measurement matrix is rank deficient".into()))?;
        // rows of A are the DCTs of the rows of phi
        let m = p.nrows();
        let mut a = DMatrix::<f64>::zeros(m, BLOCK_LEN);
        let mut row = vec![0.0; BLOCK_LEN];
        let mut coeffs = vec![0.0; BLOCK_LEN];
        for i in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = p[(i, j)];
            }
            basis.forward_into(&row, &mut coeffs);
            for (j, c) in coeffs.iter().enumerate() {
                a[(i, j)] = *c;
            }
        }
        let l = gram.l();
        if !l.solve_lower_triangular_mut(&mut a) {
            return Err(Error::Parameter("measurement matrix is rank deficient".into()));
        }
        let b_rows = a.transpose().iter().map(|&v| v as f32).collect();
        Ok(Self { phi, basis, gram, b_rows })
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    /// `A s`.
    pub fn apply(&self, coeffs: &[f64], pixels: &mut [f64]) -> DVector<f64> {
        self.basis.inverse_into(coeffs, pixels);
        self.phi.entries() * DVector::from_column_slice(pixels)
    }

    /// `A^T r` written into `out`.
    pub fn apply_transpose(&self, r: &DVector<f64>, out: &mut [f64]) {
        let pixels = self.phi.entries().tr_mul(r);
        self.basis.forward_into(pixels.as_slice(), out);
    }

    /// Euclidean projection of `v` onto `{s : A s = y}`, given the minimum-norm
    /// feasible point `s0 = A^T (A A^T)^-1 y`.
    fn project(&self, v: &[f64], s0: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let mut r = self.apply(v, scratch);
        self.gram.solve_mut(&mut r);
        self.apply_transpose(&r, scratch);
        for i in 0..out.len() {
            out[i] = v[i] - scratch[i] + s0[i];
        }
    }

    /// Single-precision `project`: `v - B^T B v + s0`.
    fn project_fast(&self, v: &[f64], s0: &[f64], out: &mut [f64], work: &mut [f32]) {
        let (vf, back) = work.split_at_mut(BLOCK_LEN);
        for (w, x) in vf.iter_mut().zip(v) {
            *w = *x as f32;
        }
        back.fill(0.0);
        for row in self.b_rows.chunks_exact(BLOCK_LEN) {
            let r = dot(row, vf);
            for (acc, b) in back.iter_mut().zip(row) {
                *acc += r * b;
            }
        }
        for i in 0..out.len() {
            out[i] = v[i] - back[i] as f64 + s0[i];
        }
    }
}

/// Fixed-order dot product with independent lanes so it vectorizes.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut lanes = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    lanes.iter().sum::<f32>() + tail
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Run basis pursuit for one block. Never fails: when the iteration budget
/// runs out the last iterate (projected to be feasible) is returned with
/// `converged = false`.
pub fn basis_pursuit(op: &SensingOperator<'_>, y: &[f64], cfg: &BpSolverConfig) -> BpSolution {
    let n = BLOCK_LEN;
    let y_norm = norm(y);
    if y_norm == 0.0 {
        return BpSolution {
            coefficients: vec![0.0; n],
            iterations: 0,
            converged: true,
            residual: 0.0,
        };
    }
    // BP is positively homogeneous in y. Solve at the scale where the
    // coefficients have unit RMS so the penalty means the same for every block.
    let scale = y_norm / libm::sqrt(n as f64);
    let mut y_scaled = DVector::from_iterator(y.len(), y.iter().map(|v| v / scale));
    let mut scratch = vec![0.0; n];

    let mut s0 = vec![0.0; n];
    op.gram.solve_mut(&mut y_scaled);
    op.apply_transpose(&y_scaled, &mut s0);

    let rho = cfg.penalty;
    let alpha = cfg.relaxation;
    let kappa = 1.0 / rho;
    let mut z = s0.clone();
    let mut u = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut z_prev = vec![0.0; n];
    let mut work = vec![0.0f32; 2 * n];

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iterations {
        iterations = k;
        for i in 0..n {
            v[i] = z[i] - u[i];
        }
        op.project_fast(&v, &s0, &mut s, &mut work);

        z_prev.copy_from_slice(&z);
        let (mut r2, mut d2, mut s2, mut z2, mut u2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let relaxed = alpha * s[i] + (1.0 - alpha) * z_prev[i];
            z[i] = soft_threshold(relaxed + u[i], kappa);
            u[i] += relaxed - z[i];
            let r = s[i] - z[i];
            let d = z[i] - z_prev[i];
            r2 += r * r;
            d2 += d * d;
            s2 += s[i] * s[i];
            z2 += z[i] * z[i];
            u2 += u[i] * u[i];
        }
        let primal = libm::sqrt(r2);
        let dual = rho * libm::sqrt(d2);
        let primal_scale = libm::sqrt(s2.max(z2));
        let dual_scale = rho * libm::sqrt(u2);
        if primal <= cfg.primal_tolerance * primal_scale && dual <= cfg.dual_tolerance * dual_scale {
            converged = true;
            break;
        }
    }

    // Return the feasible point nearest the sparse iterate.
    op.project(&z, &s0, &mut s, &mut scratch);
    let ay = op.apply(&s, &mut scratch);
    let residual = libm::sqrt(
        ay.iter()
            .zip(y)
            .map(|(a, b)| (a - b / scale) * (a - b / scale))
            .sum::<f64>(),
    ) / libm::sqrt(n as f64);
    for c in s.iter_mut() {
        *c *= scale;
    }
    BpSolution {
        coefficients: s,
        iterations,
        converged,
        residual,
    }
}
