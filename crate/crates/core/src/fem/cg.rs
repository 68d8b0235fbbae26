//! Jacobi-preconditioned conjugate gradients.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// Solve on the complement of the constants (singular Neumann/periodic systems).
    ZeroMean,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to 10 × dimension when `None`.
    pub max_iter: Option<usize>,
    pub constraint: Constraint,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            constraint: Constraint::None,
        }
    }
}

impl CgOptions {
    pub fn zero_mean() -> Self {
        Self {
            constraint: Constraint::ZeroMean,
            ..Self::default()
        }
    }
}

/// Result of a CG run. When `converged` is false, `x` is the best iterate.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl CgSolution {
    pub fn into_converged(self) -> Result<Vec<f64>> {
        if self.converged {
            Ok(self.x)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`.
///
/// Convergence is declared when ‖b − A x‖ ≤ tol · ‖b‖.
pub fn solve_cg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgSolution> {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs length does not match matrix");
    let zero_mean = opts.constraint == Constraint::ZeroMean;
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));

    let b_norm = dot(b, b).sqrt();
    if zero_mean && n > 0 && b_norm > 0.0 {
        let defect = b.iter().sum::<f64>().abs() / ((n as f64).sqrt() * b_norm);
        if defect > opts.tol {
            return Err(Error::IncompatibleRhs(defect));
        }
    }
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    if zero_mean {
        remove_mean(&mut x);
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    if zero_mean {
        remove_mean(&mut r);
    }
    let res = dot(&r, &r).sqrt() / b_norm;
    let mut best = (res, x.clone());
    if res <= opts.tol {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: res,
            converged: true,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    if zero_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if zero_mean {
            remove_mean(&mut r);
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= opts.tol {
            // The recursive residual can drift from the true one; confirm.
            let mut true_r = a.mul_vec(&x);
            true_r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            if zero_mean {
                remove_mean(&mut true_r);
            }
            let true_res = dot(&true_r, &true_r).sqrt() / b_norm;
            if true_res <= opts.tol {
                if zero_mean {
                    remove_mean(&mut x);
                }
                return Ok(CgSolution {
                    x,
                    iterations: it,
                    residual: true_res,
                    converged: true,
                });
            }
            r = true_r;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if zero_mean {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (residual, mut x) = best;
    if zero_mean {
        remove_mean(&mut x);
    }
    Ok(CgSolution {
        x,
        iterations: max_iter,
        residual,
        converged: false,
    })
}
