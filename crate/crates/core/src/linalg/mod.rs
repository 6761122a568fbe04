//! Sparse symmetric positive definite matrices and linear solves.
//!
//! Solves default to a sparse Cholesky factorisation with a minimum-degree
//! ordering, followed by iterative refinement until the relative residual is
//! below [`SOLVE_RTOL`]. A Jacobi-preconditioned conjugate gradient solver is
//! available as an alternative backend.

mod cg;
mod cholesky;
mod csr;
mod ordering;

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use thiserror::Error;

pub use cg::{cg_jacobi_solve, CgOutcome};
pub use cholesky::{CholeskyFactor, SymbolicCholesky};
pub use csr::SparseSpdMatrix;
pub use ordering::minimum_degree;

/// Relative residual `||Ax - b|| / ||b||` every solve must reach.
pub const SOLVE_RTOL: f64 = 1e-12;

/// Maximum number of iterative refinement sweeps after a direct solve.
const MAX_REFINEMENT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotSpd { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("solver stalled at relative residual {residual:e} (target {target:e})")]
    ToleranceNotReached { residual: f64, target: f64 },
}

/// Linear solver backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SolveBackend {
    #[default]
    Cholesky,
    JacobiCg,
}

static SOLVE_COUNT: AtomicU64 = AtomicU64::new(0);
static WORST_RESIDUAL_BITS: AtomicU64 = AtomicU64::new(0);

/// Process-wide record of every solve performed through this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub solves: u64,
    pub worst_relative_residual: f64,
}

pub fn solve_stats() -> SolveStats {
    SolveStats {
        solves: SOLVE_COUNT.load(AtomicOrdering::Relaxed),
        worst_relative_residual: f64::from_bits(WORST_RESIDUAL_BITS.load(AtomicOrdering::Relaxed)),
    }
}

fn record_solve(relative_residual: f64) {
    SOLVE_COUNT.fetch_add(1, AtomicOrdering::Relaxed);
    // nonnegative floats order like their bit patterns
    WORST_RESIDUAL_BITS.fetch_max(relative_residual.to_bits(), AtomicOrdering::Relaxed);
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn relative_residual(a: &SparseSpdMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mut r = a.mul(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let bnorm = norm2(b);
    let rel = if bnorm == 0.0 { norm2(&r) } else { norm2(&r) / bnorm };
    (r, rel)
}

/// Solves `A x = b` with the default backend.
pub fn spd_solve(a: &SparseSpdMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    spd_solve_with(a, b, SolveBackend::Cholesky)
}

pub fn spd_solve_with(
    a: &SparseSpdMatrix,
    b: &[f64],
    backend: SolveBackend,
) -> Result<Vec<f64>, LinalgError> {
    check_len(a.dim(), b.len())?;
    match backend {
        SolveBackend::Cholesky => CholeskyFactor::new(a)?.solve_refined(a, b),
        SolveBackend::JacobiCg => {
            if norm2(b) == 0.0 {
                record_solve(0.0);
                return Ok(vec![0.0; b.len()]);
            }
            let out = cg_jacobi_solve(a, b, 0.5 * SOLVE_RTOL, 20 * a.dim().max(10))?;
            let (_, rel) = relative_residual(a, &out.x, b);
            if rel > SOLVE_RTOL {
                return Err(LinalgError::ToleranceNotReached {
                    residual: rel,
                    target: SOLVE_RTOL,
                });
            }
            record_solve(rel);
            Ok(out.x)
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

impl CholeskyFactor {
    /// Direct solve followed by iterative refinement against `a`, which must be
    /// the matrix this factor was computed from.
    pub fn solve_refined(&self, a: &SparseSpdMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(a.dim(), b.len())?;
        if b.iter().all(|&v| v == 0.0) {
            record_solve(0.0);
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.solve(b)?;
        let (mut r, mut rel) = relative_residual(a, &x, b);
        let mut sweeps = 0;
        while rel > 0.1 * SOLVE_RTOL && sweeps < MAX_REFINEMENT {
            let dx = self.solve(&r)?;
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
            let (r_new, rel_new) = relative_residual(a, &candidate, b);
            sweeps += 1;
            if rel_new >= rel {
                break;
            }
            x = candidate;
            r = r_new;
            rel = rel_new;
        }
        if rel > SOLVE_RTOL {
            return Err(LinalgError::ToleranceNotReached {
                residual: rel,
                target: SOLVE_RTOL,
            });
        }
        record_solve(rel);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 2D five-point Laplacian on an `n x n` grid.
    pub(crate) fn laplacian(n: usize) -> SparseSpdMatrix {
        let idx = |i: usize, j: usize| i * n + j;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i + 1 < n {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                    t.push((idx(i + 1, j), idx(i, j), -1.0));
                }
                if j + 1 < n {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                    t.push((idx(i, j + 1), idx(i, j), -1.0));
                }
            }
        }
        SparseSpdMatrix::from_triplets(n * n, &t).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = SparseSpdMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        assert_eq!(spd_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let a = SparseSpdMatrix::from_triplets(
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let x = spd_solve(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian(5);
        assert_eq!(spd_solve(&a, &[0.0; 25]).unwrap(), vec![0.0; 25]);
        let x = spd_solve_with(&a, &[0.0; 25], SolveBackend::JacobiCg).unwrap();
        assert_eq!(x, vec![0.0; 25]);
    }

    #[test]
    fn both_backends_reach_tolerance() {
        let a = laplacian(30);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..900).map(|_| rng.random_range(-1.0..1.0)).collect();
        for backend in [SolveBackend::Cholesky, SolveBackend::JacobiCg] {
            let x = spd_solve_with(&a, &b, backend).unwrap();
            let (_, rel) = relative_residual(&a, &x, &b);
            assert!(rel <= SOLVE_RTOL, "{backend:?}: {rel}");
        }
        assert!(solve_stats().worst_relative_residual <= SOLVE_RTOL);
    }

    #[test]
    fn dimension_mismatch() {
        let a = SparseSpdMatrix::identity(3);
        assert_eq!(
            spd_solve(&a, &[1.0, 2.0]),
            Err(LinalgError::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SparseSpdMatrix::from_triplets(
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)],
        )
        .unwrap();
        assert!(matches!(
            spd_solve(&a, &[1.0, 1.0]),
            Err(LinalgError::NotSpd { .. })
        ));
    }
}
