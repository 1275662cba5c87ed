//! Spectral routes: dense eigendecomposition of the symmetrised generator and
//! a Lanczos iteration for the bottom of the Dirichlet spectrum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::operator::RestrictedOperator;
use crate::error::{Error, Result};

/// Largest subset handled by dense eigendecomposition.
pub const DENSE_LIMIT: usize = 2000;

/// Eigen-pairs of `S = Θ^{1/2}(−L)Θ^{-1/2}` on the subset.
pub(crate) struct DenseSpectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn new(op: &RestrictedOperator) -> Self {
        let eig = SymmetricEigen::new(op.dense_symmetric());
        DenseSpectrum {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    /// `p_t(x0, ·)` on the subset (local indices) in the density convention.
    pub fn kernel_row(&self, op: &RestrictedOperator, x0_local: usize, t: f64) -> Vec<f64> {
        let n = op.len();
        let coef: Vec<f64> = (0..n)
            .map(|k| (-self.values[k] * t).exp() * self.vectors[(x0_local, k)])
            .collect();
        let s0 = op.theta[x0_local].sqrt();
        (0..n)
            .map(|y| {
                let mut acc = 0.0;
                for (k, c) in coef.iter().enumerate() {
                    acc += self.vectors[(y, k)] * c;
                }
                (acc / (s0 * op.theta[y].sqrt())).max(0.0)
            })
            .collect()
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Smallest eigenvalue of `S` via Lanczos with full reorthogonalisation and
/// restarts from the current Ritz vector.
pub(crate) fn lanczos_smallest(op: &RestrictedOperator, tol: f64, max_dim: usize, restarts: usize) -> Result<f64> {
    let n = op.len();
    let dim = max_dim.min(n);
    let scale = 2.0 * op.max_rate().max(1e-300);
    // start vector proportional to sqrt(θ), the ground state when nothing leaks
    let mut start: Vec<f64> = op.theta.iter().map(|t| t.sqrt()).collect();
    let mut best_residual = f64::INFINITY;
    for _ in 0..=restarts {
        let norm = start.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / norm).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        let mut ritz = (0.0, Vec::new(), f64::INFINITY);
        for j in 0..dim {
            op.apply_symmetric(&basis[j], &mut w);
            let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alpha.push(a);
            // full reorthogonalisation, twice
            for _ in 0..2 {
                for q in &basis {
                    let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let m = alpha.len();
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &lmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let residual = (b * eig.eigenvectors[(m - 1, imin)]).abs();
            let coeffs: Vec<f64> = (0..m).map(|r| eig.eigenvectors[(r, imin)]).collect();
            ritz = (lmin, coeffs, residual);
            if residual <= tol * scale || b <= 1e-14 * scale || j + 1 == dim {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let (value, coeffs, residual) = ritz;
        best_residual = best_residual.min(residual);
        if residual <= tol * scale || basis.len() == n {
            return Ok(value.max(0.0));
        }
        start = vec![0.0; n];
        for (c, q) in coeffs.iter().zip(&basis) {
            for (s, qi) in start.iter_mut().zip(q) {
                *s += c * qi;
            }
        }
    }
    Err(Error::EigenNonConvergence { residual: best_residual })
}
