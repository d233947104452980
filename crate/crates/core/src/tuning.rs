//! GACV and BGACV scores for penalized and parametric Bernoulli fits, and
//! lambda selection along a path.
//!
//! For a fit with logits `f`, probabilities `p` and selected columns `B*`
//! (constant plus the nonzero patterns),
//!
//! ```text
//! OBS   = (1/n) sum [-y_i f_i + log(1 + e^{f_i})]
//! gamma = tr(H) * sum y_i (y_i - p_i) / (n - N_B0),   H = B* (B*' W B*)^{-1} B*'
//! GACV  = OBS + gamma / n
//! BGACV = OBS + (log n / 2) * gamma / n
//! ```
//!
//! `N_B0` counts the nonzero penalized coefficients only. The constant-only
//! model uses `n - 1` as its denominator.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};
use crate::patterns::DesignMatrix;
use crate::solver::{mean_nll, probabilities, variances, ModelFit};

/// Relative ridge added to a singular `B*' W B*`.
pub const GRAM_RIDGE: f64 = 1e-10;
/// `R` from the QR of `W^{1/2}B*` counts as singular below this diagonal ratio.
const QR_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gacv,
    Bgacv,
}

impl std::str::FromStr for Criterion {
    type Err = LpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gacv" => Ok(Criterion::Gacv),
            "bgacv" => Ok(Criterion::Bgacv),
            other => Err(LpsError::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub lambda: f64,
    pub obs: f64,
    pub trace_h: f64,
    /// `tr(WH)`; equals the number of columns of `B*` up to rounding.
    pub trace_wh: f64,
    pub gamma: f64,
    pub gacv: f64,
    pub bgacv: f64,
    /// `N_B0`.
    pub support_size: usize,
}

impl ScoreRecord {
    pub fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Gacv => self.gacv,
            Criterion::Bgacv => self.bgacv,
        }
    }

    /// Columns of `B*`: the constant plus the support.
    pub fn basis_size(&self) -> usize {
        self.support_size + 1
    }
}

/// `tr(H)` and `tr(WH)` for `H = B*(B*'WB*)^{-1}B*'`.
#[derive(Debug, Clone, Copy)]
pub struct HTrace {
    pub trace_h: f64,
    pub trace_wh: f64,
    pub ridged: bool,
}

/// Computes `tr(H)` and `tr(WH)` without forming the `n x n` matrix. `cols`
/// are the columns of `B*`.
///
/// With `W^{1/2}B* = QR`, `H = MM'` for `M = B*R^{-1}`, so `tr(H)` is the
/// squared Frobenius norm of `M` and `tr(WH)` its row-weighted version. This
/// avoids squaring the condition number, which matters once fitted
/// probabilities approach 0 or 1. If `R` is numerically singular the traces
/// come from `U = B*'WB*` with a small ridge instead.
pub fn compute_h_trace(design: &DesignMatrix, cols: &[usize], w: &[f64]) -> Result<HTrace> {
    if cols.is_empty() {
        return Err(LpsError::Scoring("B* has no columns".into()));
    }
    if let Some(t) = traces_from_qr(&design.dense(cols), w) {
        return Ok(t);
    }
    let u = design.weighted_gram(cols, w);
    let gram = design.weighted_gram(cols, &vec![1.0; design.n()]);
    traces_from_grams(&u, &gram)
}

fn traces_from_qr(b: &DMatrix<f64>, w: &[f64]) -> Option<HTrace> {
    let (n, k) = b.shape();
    if n < k {
        return None;
    }
    let mut sw = b.clone();
    for (i, wi) in w.iter().enumerate() {
        sw.row_mut(i).scale_mut(wi.max(0.0).sqrt());
    }
    let r = sw.qr().r();
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > QR_RANK_TOL * max) {
        return None;
    }
    // rows of M = B* R^{-1} are the columns of R^{-T} B*'
    let mt = r.transpose().solve_lower_triangular(&b.transpose())?;
    let (mut trace_h, mut trace_wh) = (0.0, 0.0);
    for (i, col) in mt.column_iter().enumerate() {
        let sq = col.norm_squared();
        trace_h += sq;
        trace_wh += w[i] * sq;
    }
    Some(HTrace { trace_h, trace_wh, ridged: false })
}

fn traces_from_grams(u: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<HTrace> {
    let k = u.nrows();
    let (chol, ridged) = match well_conditioned_cholesky(u.clone()) {
        Some(c) => (c, false),
        None => {
            let mean_diag = (0..k).map(|i| u[(i, i)]).sum::<f64>() / k as f64;
            let bump = GRAM_RIDGE * mean_diag.max(f64::MIN_POSITIVE);
            let mut reg = u.clone();
            for i in 0..k {
                reg[(i, i)] += bump;
            }
            let c = reg.cholesky().ok_or_else(|| {
                LpsError::Scoring(format!(
                    "B*'WB* ({k}x{k}) is not positive definite even after ridging"
                ))
            })?;
            (c, true)
        }
    };
    let trace_h = chol.solve(gram).trace();
    let trace_wh = chol.solve(u).trace();
    Ok(HTrace { trace_h, trace_wh, ridged })
}

fn well_conditioned_cholesky(u: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let c = u.cholesky()?;
    let l = c.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    // reciprocal condition of U is at least (min/max)^2 / k; reject near-singular
    if !(min > 0.0) || (min / max).powi(2) < 1e-14 {
        return None;
    }
    Some(c)
}

/// Scores a model given its logits, the columns of `B*`, and `N_B0`.
pub fn score_logits(
    design: &DesignMatrix,
    y: &[f64],
    logits: &[f64],
    basis: &[usize],
    support_size: usize,
    lambda: f64,
) -> Result<ScoreRecord> {
    let n = design.n();
    if n <= support_size.max(1) {
        return Err(LpsError::Scoring(format!(
            "n={n} does not exceed the number of selected patterns {support_size}"
        )));
    }
    let prob = probabilities(logits);
    let w = variances(&prob);
    let ht = compute_h_trace(design, basis, &w)?;
    let obs = mean_nll(logits, y);
    let fit_term: f64 = y.iter().zip(&prob).map(|(yi, pi)| yi * (yi - pi)).sum();
    // the constant-only model keeps one degree of freedom for the intercept
    let denom = if support_size == 0 { n - 1 } else { n - support_size };
    let gamma = ht.trace_h * fit_term / denom as f64;
    let nf = n as f64;
    Ok(ScoreRecord {
        lambda,
        obs,
        trace_h: ht.trace_h,
        trace_wh: ht.trace_wh,
        gamma,
        gacv: obs + gamma / nf,
        bgacv: obs + 0.5 * nf.ln() * gamma / nf,
        support_size,
    })
}

/// GACV and BGACV for a converged penalized fit.
pub fn score_fit(fit: &ModelFit, design: &DesignMatrix, y: &[f64]) -> Result<ScoreRecord> {
    if !fit.converged {
        return Err(LpsError::Scoring(format!(
            "fit at lambda={:.4e} did not converge",
            fit.lambda
        )));
    }
    let logits = design.logits(&fit.all_coefficients());
    let basis: Vec<usize> = std::iter::once(DesignMatrix::CONSTANT).chain(fit.support()).collect();
    score_logits(design, y, &logits, &basis, fit.support_size(), fit.lambda)
}

pub fn gacv(fit: &ModelFit, design: &DesignMatrix, y: &[f64]) -> Result<ScoreRecord> {
    score_fit(fit, design, y)
}

pub fn bgacv(fit: &ModelFit, design: &DesignMatrix, y: &[f64]) -> Result<ScoreRecord> {
    score_fit(fit, design, y)
}

/// Outcome of choosing a lambda on a path.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Index of the chosen fit in the path.
    pub index: usize,
    /// One record per scored fit, in path order.
    pub records: Vec<ScoreRecord>,
    /// Path index of each record.
    pub record_index: Vec<usize>,
}

impl Selection {
    pub fn chosen_record(&self) -> &ScoreRecord {
        let k = self.record_index.iter().position(|&i| i == self.index).expect("chosen fit is scored");
        &self.records[k]
    }
}

/// Scores every converged fit and returns the one minimizing `criterion`;
/// ties go to the larger lambda. Unconverged or unscorable fits are skipped.
pub fn select_lambda(
    path: &[ModelFit],
    design: &DesignMatrix,
    y: &[f64],
    criterion: Criterion,
) -> Result<Selection> {
    if path.is_empty() {
        return Err(LpsError::Selection("empty path".into()));
    }
    let mut records = Vec::new();
    let mut record_index = Vec::new();
    for (i, fit) in path.iter().enumerate() {
        if !fit.converged {
            log::warn!("skipping unconverged fit at lambda={:.4e}", fit.lambda);
            continue;
        }
        match score_fit(fit, design, y) {
            Ok(r) => {
                records.push(r);
                record_index.push(i);
            }
            Err(e) => log::warn!("skipping fit at lambda={:.4e}: {e}", fit.lambda),
        }
    }
    let best = records
        .iter()
        .zip(&record_index)
        .filter(|(r, _)| r.score(criterion).is_finite())
        .min_by(|(a, ia), (b, ib)| {
            a.score(criterion)
                .total_cmp(&b.score(criterion))
                .then_with(|| path[**ib].lambda.total_cmp(&path[**ia].lambda))
        })
        .map(|(_, &i)| i)
        .ok_or_else(|| LpsError::Selection("no fit on the path could be scored".into()))?;
    Ok(Selection { index: best, records, record_index })
}

/// CSV with columns `lambda,obs,trace_H,gamma,gacv,bgacv,N_B0,selected`.
pub fn write_score_csv<W: Write>(
    records: &[ScoreRecord],
    selected_lambda: Option<f64>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "obs", "trace_H", "gamma", "gacv", "bgacv", "N_B0", "selected"])?;
    for r in records {
        let sel = selected_lambda.is_some_and(|l| l == r.lambda);
        w.write_record([
            format!("{:.10e}", r.lambda),
            format!("{:.12}", r.obs),
            format!("{:.10}", r.trace_h),
            format!("{:.10}", r.gamma),
            format!("{:.12}", r.gacv),
            format!("{:.12}", r.bgacv),
            r.support_size.to_string(),
            (sel as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
