//! Bernoulli negative log likelihood `L(y, f) = (1/n) sum [-y_i f_i + log(1 + e^{f_i})]`
//! and its derivatives with respect to the design coefficients.

use nalgebra::DMatrix;

use crate::patterns::DesignMatrix;

/// Logits beyond this magnitude give probabilities equal to 0 or 1 in double
/// precision; the cap is applied only when forming probabilities.
pub const LOGIT_CAP: f64 = 36.0;

#[inline]
pub fn log1pexp(f: f64) -> f64 {
    (-f.abs()).exp().ln_1p() + f.max(0.0)
}

#[inline]
pub fn sigmoid(f: f64) -> f64 {
    let f = f.clamp(-LOGIT_CAP, LOGIT_CAP);
    1.0 / (1.0 + (-f).exp())
}

/// Mean negative log likelihood at logits `f`.
pub fn mean_nll(f: &[f64], y: &[f64]) -> f64 {
    let n = f.len() as f64;
    f.iter()
        .zip(y)
        .map(|(&fi, &yi)| log1pexp(fi) - yi * fi)
        .sum::<f64>()
        / n
}

pub fn probabilities(f: &[f64]) -> Vec<f64> {
    f.iter().map(|&v| sigmoid(v)).collect()
}

/// `p_i (1 - p_i)`.
pub fn variances(prob: &[f64]) -> Vec<f64> {
    prob.iter().map(|&p| p * (1.0 - p)).collect()
}

/// `(1/n) B_j' (p - y)` for every `j` in `cols`.
pub fn gradient_on(design: &DesignMatrix, resid: &[f64], cols: &[usize]) -> Vec<f64> {
    let n = design.n() as f64;
    cols.iter().map(|&j| design.dot(j, resid) / n).collect()
}

/// `(1/n) B_s' W B_s`.
pub fn hessian_on(design: &DesignMatrix, weights: &[f64], cols: &[usize]) -> DMatrix<f64> {
    design.weighted_gram(cols, weights) / design.n() as f64
}

/// Value, gradient and (optionally) Hessian block of the loss restricted to a
/// column subset.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Evaluates the loss at dense coefficients `z` (length `N_B`, intercept at
/// column 0) with derivatives on `subset`.
pub fn neg_log_lik_grad_hess(
    design: &DesignMatrix,
    y: &[f64],
    z: &[f64],
    subset: &[usize],
    with_hessian: bool,
) -> LossEval {
    let coefs: Vec<(usize, f64)> = z.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
    let f = design.logits(&coefs);
    let prob = probabilities(&f);
    let resid: Vec<f64> = prob.iter().zip(y).map(|(p, yi)| p - yi).collect();
    LossEval {
        value: mean_nll(&f, y),
        gradient: gradient_on(design, &resid, subset),
        hessian: with_hessian.then(|| hessian_on(design, &variances(&prob), subset)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1pexp_is_stable() {
        assert!((log1pexp(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log1pexp(800.0) - 800.0).abs() < 1e-12);
        assert!(log1pexp(-800.0) >= 0.0 && log1pexp(-800.0) < 1e-300);
        assert!((log1pexp(3.0) - (1.0 + 3f64.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_logits_give_log_two() {
        let rows = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]];
        let b = DesignMatrix::from_dense_rows(&rows).unwrap();
        let y = [1.0, 0.0, 1.0, 1.0];
        let e = neg_log_lik_grad_hess(&b, &y, &[0.0; 3], &[0, 1, 2], true);
        assert!((e.value - 2f64.ln()).abs() < 1e-15);
        // (1/n) sum B_ij (0.5 - y_i)
        let want = [(0.5 * 4.0 - 3.0) / 4.0, (1.0 - 2.0) / 4.0, (1.0 - 1.0) / 4.0];
        for (g, w) in e.gradient.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
        let h = e.hessian.unwrap();
        assert!((h[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((h[(1, 2)] - 0.25 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn intercept_mle_zeroes_gradient() {
        let b = DesignMatrix::from_indicator_columns(10, vec![]).unwrap();
        let y: Vec<f64> = (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect();
        let mu = (3.0f64 / 7.0).ln();
        let e = neg_log_lik_grad_hess(&b, &y, &[mu], &[0], false);
        assert!(e.gradient[0].abs() < 1e-15);
    }
}
