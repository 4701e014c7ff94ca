//! Damped Newton-Raphson for square nonlinear systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivots smaller than this in magnitude make the Jacobian singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Maximum step halvings per iteration.
pub const MAX_HALVINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    /// Residual ∞-norm threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step factor in (0, 1].
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 25,
            damping: 1.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0) {
            return Err(format!("newton tol must be positive, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return Err("newton max_iter must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(format!("newton damping must be in (0, 1], got {}", self.damping));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NewtonError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual_norm:e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        iterate: Vec<f64>,
    },
    #[error("singular Jacobian at iteration {iteration} (pivot {pivot:e})")]
    SingularJacobian { iteration: usize, pivot: f64 },
    #[error("dimension mismatch: residual {residual}, jacobian {rows}x{cols}, unknowns {unknowns}")]
    DimensionMismatch {
        residual: usize,
        rows: usize,
        cols: usize,
        unknowns: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solve `a x = rhs` by LU with partial pivoting, in place. The row with the
/// largest magnitude (first one on ties) is chosen as pivot.
pub fn lu_solve(mut a: DMatrix<f64>, mut rhs: DVector<f64>) -> Result<DVector<f64>, f64> {
    let n = a.nrows();
    for k in 0..n {
        let mut p = k;
        let mut best = a[(k, k)].abs();
        for i in k + 1..n {
            let v = a[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best >= PIVOT_TOL) {
            return Err(best);
        }
        if p != k {
            a.swap_rows(p, k);
            rhs.swap_rows(p, k);
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            a[(i, k)] = f;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= a[(k, j)] * rhs[j];
        }
        rhs[k] = s / a[(k, k)];
    }
    Ok(rhs)
}

/// Newton iteration `x ← x + α Δ` with `J Δ = −R`. The step factor starts at
/// `config.damping` and is halved up to [`MAX_HALVINGS`] times while the
/// residual norm fails to decrease.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[f64],
    config: &NewtonConfig,
) -> Result<NewtonOutcome, NewtonError>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> DMatrix<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    if r.len() != n {
        return Err(NewtonError::DimensionMismatch {
            residual: r.len(),
            rows: 0,
            cols: 0,
            unknowns: n,
        });
    }
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    while norm > config.tol {
        if iterations == config.max_iter {
            return Err(NewtonError::NonConvergence {
                iterations,
                residual_norm: norm,
                iterate: x,
            });
        }
        iterations += 1;
        let jac = jacobian(&x);
        if jac.nrows() != n || jac.ncols() != n {
            return Err(NewtonError::DimensionMismatch {
                residual: n,
                rows: jac.nrows(),
                cols: jac.ncols(),
                unknowns: n,
            });
        }
        let rhs = -DVector::from_vec(r.clone());
        let step = lu_solve(jac, rhs).map_err(|pivot| NewtonError::SingularJacobian {
            iteration: iterations,
            pivot,
        })?;

        let mut alpha = config.damping;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let tr = residual(&trial);
            let tn = inf_norm(&tr);
            if tn < norm || halvings == MAX_HALVINGS {
                x = trial;
                r = tr;
                norm = tn;
                break;
            }
            alpha *= 0.5;
            halvings += 1;
        }
        if !norm.is_finite() {
            return Err(NewtonError::NonConvergence {
                iterations,
                residual_norm: norm,
                iterate: x,
            });
        }
    }
    Ok(NewtonOutcome {
        x,
        iterations,
        residual_norm: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_quadratic() {
        let cfg = NewtonConfig::default();
        let out = newton_solve(
            |x| vec![x[0] * x[0] - 4.0],
            |x| DMatrix::from_element(1, 1, 2.0 * x[0]),
            &[3.0],
            &cfg,
        )
        .unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-8);
        assert!(out.iterations <= 6);
        assert!(out.residual_norm <= cfg.tol);
    }

    #[test]
    fn linear_system_one_iteration() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 5.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let res = |x: &[f64]| {
            let xv = DVector::from_column_slice(x);
            (&a * xv - &b).iter().copied().collect::<Vec<_>>()
        };
        let out = newton_solve(res, |_| a.clone(), &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn already_converged_takes_zero_iterations() {
        let out = newton_solve(
            |x| vec![x[0] - 1.0],
            |_| DMatrix::from_element(1, 1, 1.0),
            &[1.0],
            &NewtonConfig::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![1.0]);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let err = newton_solve(
            |x| vec![x[0] + x[1] - 1.0, 2.0 * x[0] + 2.0 * x[1] - 3.0],
            |_| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            &[0.0, 0.0],
            &NewtonConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, NewtonError::SingularJacobian { .. }));
    }

    #[test]
    fn non_convergence_carries_iterate() {
        // x^2 + 1 has no real root
        let cfg = NewtonConfig {
            max_iter: 5,
            ..Default::default()
        };
        let err = newton_solve(
            |x| vec![x[0] * x[0] + 1.0],
            |x| DMatrix::from_element(1, 1, 2.0 * x[0]),
            &[0.5],
            &cfg,
        )
        .unwrap_err();
        match err {
            NewtonError::NonConvergence {
                iterations,
                iterate,
                ..
            } => {
                assert_eq!(iterations, 5);
                assert_eq!(iterate.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let err = newton_solve(
            |_| vec![1.0, 2.0],
            |_| DMatrix::zeros(2, 2),
            &[0.0],
            &NewtonConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, NewtonError::DimensionMismatch { .. }));
    }

    #[test]
    fn deterministic_iterates() {
        let run = || {
            newton_solve(
                |x| vec![x[0].exp() - 2.0 + x[1], x[1] * x[1] - x[0]],
                |x| DMatrix::from_row_slice(2, 2, &[x[0].exp(), 1.0, -1.0, 2.0 * x[1]]),
                &[0.3, 0.7],
                &NewtonConfig::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(NewtonConfig::default().validate().is_ok());
        assert!(NewtonConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(NewtonConfig { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(NewtonConfig { damping: 1.5, ..Default::default() }.validate().is_err());
    }
}
