//! Closed-form pieces of the active-set iteration: the separable first-order
//! subproblem, the near-optimality measure, and the damped reduced Newton
//! system.

use nalgebra::{DMatrix, DVector};

use super::objective::{gradient_on, hessian_on, probabilities, variances};
use crate::error::{LpsError, Result};
use crate::patterns::DesignMatrix;

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// New value of one coordinate after the first-order step:
/// `argmin_u g (u - z) + (alpha/2)(u - z)^2 + lambda |u|` for penalized
/// coordinates, a plain gradient step for the intercept.
#[inline]
pub fn first_order_target(z: f64, g: f64, alpha: f64, lambda: f64, penalized: bool) -> f64 {
    let v = z - g / alpha;
    if penalized {
        soft_threshold(v, lambda / alpha)
    } else {
        v
    }
}

/// First-order step `d` restricted to `working` (with `grad[k]` the gradient of
/// column `working[k]`); `d_j = 0` off the working set. Column 0 is the
/// unpenalized intercept.
pub fn first_order_step(
    z: &[f64],
    grad: &[f64],
    working: &[usize],
    alpha: f64,
    lambda: f64,
) -> Vec<f64> {
    let mut d = vec![0.0; z.len()];
    for (&j, &g) in working.iter().zip(grad) {
        let target = first_order_target(z[j], g, alpha, lambda, j != DesignMatrix::CONSTANT);
        d[j] = target - z[j];
    }
    d
}

/// Component of the minimum-norm subgradient residual `g + lambda v`.
#[inline]
pub fn optimality_residual(z: f64, g: f64, lambda: f64, penalized: bool) -> f64 {
    if !penalized {
        g
    } else if z > 0.0 {
        g + lambda
    } else if z < 0.0 {
        g - lambda
    } else {
        g.signum() * (g.abs() - lambda).max(0.0)
    }
}

/// `delta(z) = min_{v in d||z||_1} ||grad + lambda v||_2` over `cols`.
pub fn optimality_measure(z: &[f64], grad: &[f64], cols: &[usize], lambda: f64) -> f64 {
    cols.iter()
        .zip(grad)
        .map(|(&j, &g)| {
            let r = optimality_residual(z[j], g, lambda, j != DesignMatrix::CONSTANT);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Solves `(H_II + damping I) p = -(g_I + lambda w_I)` by Cholesky.
pub fn solve_damped_newton(
    hessian: &DMatrix<f64>,
    grad: &[f64],
    w: &[f64],
    lambda: f64,
    damping: f64,
) -> Result<Vec<f64>> {
    let k = grad.len();
    let mut a = hessian.clone();
    for i in 0..k {
        a[(i, i)] += damping;
    }
    let rhs = DVector::from_iterator(k, grad.iter().zip(w).map(|(g, wi)| -(g + lambda * wi)));
    let chol = a.cholesky().ok_or_else(|| {
        LpsError::Numerical(format!(
            "reduced Hessian of size {k} not positive definite (damping {damping:.3e}, min diag {:.3e})",
            (0..k).map(|i| hessian[(i, i)]).fold(f64::INFINITY, f64::min)
        ))
    })?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Damping `min(delta, mean diagonal of H)`.
pub fn newton_damping(hessian: &DMatrix<f64>, delta: f64) -> f64 {
    let k = hessian.nrows();
    if k == 0 {
        return delta;
    }
    let mean_diag = (0..k).map(|i| hessian[(i, i)]).sum::<f64>() / k as f64;
    delta.min(mean_diag)
}

/// Reduced Newton step on the inactive columns for coefficients `z`.
///
/// `w` holds the l1 subgradient sign for each inactive column (0 for the
/// intercept) and `delta` the current near-optimality value.
pub fn reduced_newton_step(
    design: &DesignMatrix,
    y: &[f64],
    z: &[f64],
    inactive: &[usize],
    w: &[f64],
    lambda: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    let coefs: Vec<(usize, f64)> = z.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
    let f = design.logits(&coefs);
    let prob = probabilities(&f);
    let resid: Vec<f64> = prob.iter().zip(y).map(|(p, yi)| p - yi).collect();
    let grad = gradient_on(design, &resid, inactive);
    let h = hessian_on(design, &variances(&prob), inactive);
    solve_damped_newton(&h, &grad, w, lambda, newton_damping(&h, delta))
}

/// Largest `gamma <= 1` keeping `z_i + gamma p_i` on the same side of zero as
/// `z_i` for every nonzero penalized `z_i` (the first blocking coordinate lands
/// exactly on zero). Returns the step length and the blocking coordinates.
pub fn sign_preserving_step(z: &[f64], inactive: &[usize], step: &[f64]) -> (f64, Vec<usize>) {
    let mut gamma = 1.0f64;
    for (&j, &p) in inactive.iter().zip(step) {
        if j == DesignMatrix::CONSTANT || z[j] == 0.0 || z[j] * p >= 0.0 {
            continue;
        }
        gamma = gamma.min(-z[j] / p);
    }
    let blocking = inactive
        .iter()
        .zip(step)
        .filter(|(&j, &p)| {
            j != DesignMatrix::CONSTANT && z[j] != 0.0 && z[j] * p < 0.0 && -z[j] / p <= gamma
        })
        .map(|(&j, _)| j)
        .collect();
    (gamma, blocking)
}
