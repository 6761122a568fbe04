use super::{check_len, dot, norm2, LinalgError, SparseSpdMatrix};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients with Jacobi preconditioning from a zero initial guess.
pub fn cg_jacobi_solve(
    a: &SparseSpdMatrix,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<CgOutcome, LinalgError> {
    check_len(a.dim(), b.len())?;
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(LinalgError::NotSpd { pivot: i, value: d })
            }
        })
        .collect::<Result<_, _>>()?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinalgError::NotSpd {
                pivot: it,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // recompute the true residual periodically to avoid drift
        if it % 50 == 49 {
            let ax = a.mul(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        rel = norm2(&r) / bnorm;
        if rel <= rtol {
            return Ok(CgOutcome {
                x,
                iterations: it + 1,
                relative_residual: rel,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::ToleranceNotReached {
        residual: rel,
        target: rtol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tests::laplacian;

    #[test]
    fn recovers_known_solution() {
        let a = laplacian(15);
        let ones = vec![1.0; 225];
        let b = a.matvec(&ones).unwrap();
        let out = cg_jacobi_solve(&a, &b, 1e-13, 1000).unwrap();
        assert!(out.relative_residual <= 1e-13);
        assert!(out.x.iter().all(|v| (v - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn reports_stall() {
        let a = laplacian(15);
        let b = vec![1.0; 225];
        assert!(matches!(
            cg_jacobi_solve(&a, &b, 1e-14, 2),
            Err(LinalgError::ToleranceNotReached { .. })
        ));
    }
}
