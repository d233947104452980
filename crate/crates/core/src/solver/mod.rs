//! l1-penalized Bernoulli likelihood minimization over a pattern design.
//!
//! Minimizes `T(z) = L(y, Bz) + lambda * sum_{j>0} |z_j|` with an active-set
//! method: each iteration solves a separable first-order model (soft
//! thresholding) to estimate which coefficients are zero, then tries a damped
//! Newton step on the remaining ("inactive") coefficients. Steps are accepted
//! only if they strictly decrease `T`. On wide designs the gradient is
//! evaluated on a random working set plus the current nonzeros; convergence is
//! always confirmed on the full gradient.

mod objective;
mod steps;

pub use objective::{
    gradient_on, hessian_on, log1pexp, mean_nll, neg_log_lik_grad_hess, probabilities, sigmoid,
    variances, LossEval, LOGIT_CAP,
};
pub use steps::{
    first_order_step, first_order_target, newton_damping, optimality_measure,
    optimality_residual, reduced_newton_step, sign_preserving_step, soft_threshold,
    solve_damped_newton,
};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};
use crate::patterns::DesignMatrix;

const ALPHA_MIN: f64 = 1e-30;
const ALPHA_MAX: f64 = 1e30;
/// Relative singular value below which support columns count as dependent.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the full-gradient `delta(z)`.
    pub tol: f64,
    /// Factor applied to `alpha` after first-order success (divided on failure).
    pub eta: f64,
    pub alpha0: f64,
    /// Working-set sampling fraction; `None` picks 0.1 when `N_B > 10 n`, else 1.
    pub sigma: Option<f64>,
    /// Newton steps are skipped when more columns than this are inactive.
    pub newton_max_inactive: usize,
    pub max_iters: usize,
    /// Seed for working-set sampling.
    pub seed: u64,
    /// Keep per-iteration diagnostics on the returned fit.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            eta: 0.5,
            alpha0: 1.0,
            sigma: None,
            newton_max_inactive: 500,
            max_iters: 1000,
            seed: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LpsError::InvalidArgument(m.to_string()));
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive");
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s <= 1.0) {
                return bad("sigma must lie in (0, 1]");
            }
        }
        if self.newton_max_inactive == 0 || self.max_iters == 0 {
            return bad("newton_max_inactive and max_iters must be positive");
        }
        Ok(())
    }

    pub fn effective_sigma(&self, n: usize, n_columns: usize) -> f64 {
        self.sigma
            .unwrap_or(if n_columns > 10 * n { 0.1 } else { 1.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepType {
    Newton,
    DampedNewton,
    FirstOrder,
    Rejected,
    /// Full-gradient recheck after a working-set convergence signal.
    FullCheck,
    /// Dropped columns that were linearly dependent on the rest of the support.
    Reduced,
    Converged,
}

impl StepType {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepType::Newton => "newton",
            StepType::DampedNewton => "damped_newton",
            StepType::FirstOrder => "first_order",
            StepType::Rejected => "rejected",
            StepType::FullCheck => "full_check",
            StepType::Reduced => "reduced",
            StepType::Converged => "converged",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Objective after the iteration's step.
    pub objective: f64,
    /// `delta` measured at the start of the iteration (working set).
    pub delta: f64,
    pub inactive: usize,
    pub step: StepType,
    pub alpha: f64,
}

/// Writes diagnostics as CSV rows `iter,objective,delta,inactive,step_type`.
pub fn write_trace_csv<W: Write>(trace: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "objective", "delta", "inactive", "step_type"])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:.17e}", r.objective),
            format!("{:.6e}", r.delta),
            r.inactive.to_string(),
            r.step.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Result of one penalized fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    pub lambda: f64,
    /// Number of design columns, constant included.
    pub n_columns: usize,
    pub mu: f64,
    /// Nonzero penalized coefficients as `(column, value)`, ascending by column.
    pub coefficients: Vec<(usize, f64)>,
    /// Mean negative log likelihood at the solution.
    pub neg_log_lik: f64,
    /// `neg_log_lik + lambda * ||c||_1`.
    pub objective: f64,
    pub converged: bool,
    /// Full-gradient `delta` at the returned point.
    pub delta_final: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationRecord>,
}

impl ModelFit {
    /// Columns with nonzero penalized coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients.iter().map(|&(j, _)| j).collect()
    }

    /// `N_B0`.
    pub fn support_size(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_columns];
        z[DesignMatrix::CONSTANT] = self.mu;
        for &(j, c) in &self.coefficients {
            z[j] = c;
        }
        z
    }

    /// Coefficient list including the intercept, for logit evaluation.
    pub fn all_coefficients(&self) -> Vec<(usize, f64)> {
        std::iter::once((DesignMatrix::CONSTANT, self.mu))
            .chain(self.coefficients.iter().copied())
            .collect()
    }
}

/// `T_lambda(z)` for dense `z`.
pub fn penalized_objective(design: &DesignMatrix, y: &[f64], z: &[f64], lambda: f64) -> f64 {
    let coefs: Vec<(usize, f64)> = z.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
    mean_nll(&design.logits(&coefs), y) + lambda * l1_penalized(z)
}

fn l1_penalized(z: &[f64]) -> f64 {
    z.iter().skip(1).map(|v| v.abs()).sum()
}

/// Intercept maximizing the likelihood of the constant-only model. All-0 or
/// all-1 responses are pulled half an observation inside so the value is finite.
pub fn intercept_mle(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let k = y.iter().sum::<f64>().clamp(0.5, n - 0.5);
    (k / (n - k)).ln()
}

/// Smallest `lambda` for which all penalized coefficients are zero:
/// `max_j |grad_j L|` at `z = 0` with the intercept at its MLE.
pub fn lambda_max(design: &DesignMatrix, y: &[f64]) -> f64 {
    let p0 = sigmoid(intercept_mle(y));
    let resid: Vec<f64> = y.iter().map(|yi| p0 - yi).collect();
    let cols: Vec<usize> = (1..design.n_columns()).collect();
    gradient_on(design, &resid, &cols)
        .into_iter()
        .fold(0.0, |m, g| m.max(g.abs()))
}

/// `count` log-spaced values from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_grid(design: &DesignMatrix, y: &[f64], count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if count == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(LpsError::InvalidArgument(
            "lambda grid needs count >= 1 and min_ratio in (0, 1)".into(),
        ));
    }
    let top = lambda_max(design, y);
    if !(top > 0.0 && top.is_finite()) {
        return Err(LpsError::InvalidData(
            "no penalized column has a nonzero gradient at the null model".into(),
        ));
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let (hi, lo) = (top.ln(), (top * min_ratio).ln());
    Ok((0..count)
        .map(|k| (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Mutable iteration state of the active-set method.
pub struct SolverState<'a> {
    design: &'a DesignMatrix,
    y: &'a [f64],
    lambda: f64,
    config: SolverConfig,
    sigma: f64,
    rng: ChaCha8Rng,
    pub z: Vec<f64>,
    logits: Vec<f64>,
    prob: Vec<f64>,
    loss: f64,
    pub objective: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub last_delta: f64,
    /// Inactive columns of the most recent first-order step.
    pub inactive: Vec<usize>,
    force_full: bool,
    reduced: bool,
    converged: bool,
    trace: Vec<IterationRecord>,
}

impl<'a> SolverState<'a> {
    pub fn new(
        design: &'a DesignMatrix,
        y: &'a [f64],
        lambda: f64,
        config: &SolverConfig,
        start: Option<&[f64]>,
    ) -> Result<Self> {
        config.validate()?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(LpsError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if y.len() != design.n() {
            return Err(LpsError::InvalidArgument("response length differs from design rows".into()));
        }
        let m = design.n_columns();
        let z = match start {
            Some(s) if s.len() == m => s.to_vec(),
            Some(s) => {
                return Err(LpsError::InvalidArgument(format!(
                    "warm start has {} coefficients, design has {m}",
                    s.len()
                )))
            }
            None => {
                let mut z = vec![0.0; m];
                z[DesignMatrix::CONSTANT] = intercept_mle(y);
                z
            }
        };
        let coefs: Vec<(usize, f64)> = z.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
        let logits = design.logits(&coefs);
        let prob = probabilities(&logits);
        let loss = mean_nll(&logits, y);
        let objective = loss + lambda * l1_penalized(&z);
        Ok(Self {
            design,
            y,
            lambda,
            sigma: config.effective_sigma(design.n(), m),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config: config.clone(),
            z,
            logits,
            prob,
            loss,
            objective,
            alpha: config.alpha0,
            iterations: 0,
            last_delta: f64::INFINITY,
            inactive: Vec::new(),
            force_full: false,
            reduced: false,
            converged: false,
            trace: Vec::new(),
        })
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    fn working_set(&mut self, full: bool) -> Vec<usize> {
        let m = self.design.n_columns();
        if full {
            return (0..m).collect();
        }
        let k = ((self.sigma * m as f64).ceil() as usize).clamp(1, m);
        let mut w: Vec<usize> = rand::seq::index::sample(&mut self.rng, m, k).into_vec();
        w.push(DesignMatrix::CONSTANT);
        w.extend(self.z.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j));
        w.sort_unstable();
        w.dedup();
        w
    }

    /// Objective and logits at `cand`, which differs from `z` only on `touched`.
    fn evaluate(&self, cand: &[f64], touched: &[usize]) -> (f64, Vec<f64>) {
        let mut f = self.logits.clone();
        let mut pen = self.lambda * l1_penalized(&self.z);
        for &j in touched {
            let diff = cand[j] - self.z[j];
            if diff != 0.0 {
                self.design.axpy(j, diff, &mut f);
                if j != DesignMatrix::CONSTANT {
                    pen += self.lambda * (cand[j].abs() - self.z[j].abs());
                }
            }
        }
        (mean_nll(&f, self.y) + pen.max(0.0), f)
    }

    fn accept(&mut self, cand: Vec<f64>, logits: Vec<f64>) {
        self.z = cand;
        self.prob = probabilities(&logits);
        self.loss = mean_nll(&logits, self.y);
        self.logits = logits;
        // recompute exactly to avoid drift in the incremental penalty
        self.objective = self.loss + self.lambda * l1_penalized(&self.z);
    }

    fn record(&mut self, delta: f64, step: StepType) {
        if self.config.record_trace {
            self.trace.push(IterationRecord {
                iter: self.iterations,
                objective: self.objective,
                delta,
                inactive: self.inactive.len(),
                step,
                alpha: self.alpha,
            });
        }
    }

    /// Runs one iteration; returns the step taken.
    pub fn step(&mut self) -> StepType {
        let full = self.sigma >= 1.0 || self.force_full;
        let working = self.working_set(full);
        let resid: Vec<f64> = self.prob.iter().zip(self.y).map(|(p, y)| p - y).collect();
        let grad = gradient_on(self.design, &resid, &working);
        let delta = optimality_measure(&self.z, &grad, &working, self.lambda);
        self.last_delta = delta;
        self.iterations += 1;

        if delta < self.config.tol {
            if full && !self.reduced {
                self.reduced = true;
                if self.drop_dependent_columns() {
                    self.force_full = true;
                    self.record(delta, StepType::Reduced);
                    return StepType::Reduced;
                }
            }
            if full {
                self.converged = true;
                self.record(delta, StepType::Converged);
                return StepType::Converged;
            }
            self.force_full = true;
            self.record(delta, StepType::FullCheck);
            return StepType::FullCheck;
        }
        self.force_full = false;

        // first-order step and active-set estimate
        let mut zd = self.z.clone();
        for (&j, &g) in working.iter().zip(&grad) {
            zd[j] = first_order_target(self.z[j], g, self.alpha, self.lambda, j != DesignMatrix::CONSTANT);
        }
        let (t_fo, f_fo) = self.evaluate(&zd, &working);
        let t_cur = self.objective;
        let inactive: Vec<usize> = working
            .iter()
            .copied()
            .filter(|&j| j == DesignMatrix::CONSTANT || zd[j] != 0.0)
            .collect();
        self.inactive = inactive;

        let bar = t_fo.min(t_cur);
        let mut taken = None;
        if self.inactive.len() <= self.config.newton_max_inactive {
            taken = self.try_newton(&working, &grad, &zd, delta, bar);
        }
        let step = match taken {
            Some(s) => s,
            None if t_fo < t_cur => {
                self.accept(zd, f_fo);
                StepType::FirstOrder
            }
            None => StepType::Rejected,
        };

        self.alpha = if t_fo < t_cur {
            self.config.eta * self.alpha
        } else {
            self.alpha / self.config.eta
        }
        .clamp(ALPHA_MIN, ALPHA_MAX);
        self.record(delta, step);
        step
    }

    fn try_newton(
        &mut self,
        working: &[usize],
        grad: &[f64],
        zd: &[f64],
        delta: f64,
        bar: f64,
    ) -> Option<StepType> {
        let inactive = self.inactive.clone();
        // gradient entries for the inactive columns (inactive ⊆ working)
        let mut g_i = Vec::with_capacity(inactive.len());
        let mut cursor = 0;
        for &j in &inactive {
            while working[cursor] != j {
                cursor += 1;
            }
            g_i.push(grad[cursor]);
        }
        let w_i: Vec<f64> = inactive
            .iter()
            .map(|&j| if j == DesignMatrix::CONSTANT { 0.0 } else { zd[j].signum() })
            .collect();
        let h = hessian_on(self.design, &variances(&self.prob), &inactive);
        let p = match solve_damped_newton(&h, &g_i, &w_i, self.lambda, newton_damping(&h, delta)) {
            Ok(p) => p,
            Err(e) => {
                log::debug!("skipping Newton step: {e}");
                return None;
            }
        };

        let build = |cols: &[usize], step: &[f64], gamma: f64, zero_out: &[usize]| {
            let mut cand = self.z.clone();
            for &j in working {
                cand[j] = 0.0;
            }
            for (&j, &pj) in cols.iter().zip(step) {
                cand[j] = self.z[j] + gamma * pj;
            }
            for &j in zero_out {
                cand[j] = 0.0;
            }
            cand
        };

        let cand = build(&inactive, &p, 1.0, &[]);
        let (t_n, f_n) = self.evaluate(&cand, working);
        if t_n < bar {
            self.accept(cand, f_n);
            return Some(StepType::Newton);
        }

        // A column that is zero at z but nonzero after the first-order step
        // enters with the sign of z + d. If the Newton step pushes it the other
        // way the linear penalty model is wrong for it, so it is held at zero
        // and the step is recomputed on the remaining columns.
        let full_size = inactive.len();
        let mut cols = inactive;
        let (mut g_c, mut w_c, mut h_c, mut p_c) = (g_i, w_i, h, p);
        loop {
            let keep: Vec<usize> = (0..cols.len())
                .filter(|&k| cols[k] == DesignMatrix::CONSTANT || self.z[cols[k]] != 0.0 || p_c[k] * w_c[k] >= 0.0)
                .collect();
            if keep.len() == cols.len() {
                break;
            }
            cols = keep.iter().map(|&k| cols[k]).collect();
            g_c = keep.iter().map(|&k| g_c[k]).collect();
            w_c = keep.iter().map(|&k| w_c[k]).collect();
            h_c = h_c.select_rows(&keep).select_columns(&keep);
            p_c = solve_damped_newton(&h_c, &g_c, &w_c, self.lambda, newton_damping(&h_c, delta)).ok()?;
        }
        let (gamma, blocking) = sign_preserving_step(&self.z, &cols, &p_c);
        if gamma >= 1.0 && cols.len() == full_size {
            // identical to the step already rejected
            return None;
        }
        let cand = build(&cols, &p_c, gamma, &blocking);
        let (t_d, f_d) = self.evaluate(&cand, working);
        if t_d < bar {
            self.accept(cand, f_d);
            return Some(StepType::DampedNewton);
        }
        None
    }

    /// When the support columns (with the constant) are linearly dependent the
    /// minimizer is not unique. Moving along a null vector `v` leaves the
    /// logits unchanged, and the penalty too, since optimality forces
    /// `sign(z)'v = 0`. Each move stops when a coefficient reaches zero, so
    /// the result is a minimizer whose support has full column rank.
    /// Returns whether anything changed.
    fn drop_dependent_columns(&mut self) -> bool {
        let mut changed = false;
        loop {
            let cols: Vec<usize> = (0..self.z.len())
                .filter(|&j| j == DesignMatrix::CONSTANT || self.z[j] != 0.0)
                .collect();
            let Some(v) = null_vector(&self.design.dense(&cols)) else { break };
            let hit = (0..cols.len())
                .filter(|&k| cols[k] != DesignMatrix::CONSTANT && v[k].abs() > 1e-8)
                .min_by(|&a, &b| (self.z[cols[a]] / v[a]).abs().total_cmp(&(self.z[cols[b]] / v[b]).abs()));
            let Some(hit) = hit else { break };
            let t = self.z[cols[hit]] / v[hit];
            for (k, &j) in cols.iter().enumerate() {
                self.z[j] -= t * v[k];
            }
            self.z[cols[hit]] = 0.0;
            changed = true;
        }
        if changed {
            let logits = self.design.logits(&self.z.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect::<Vec<_>>());
            let z = std::mem::take(&mut self.z);
            self.accept(z, logits);
        }
        changed
    }

    /// Full-gradient `delta` at the current point.
    pub fn full_delta(&self) -> f64 {
        let resid: Vec<f64> = self.prob.iter().zip(self.y).map(|(p, y)| p - y).collect();
        let cols: Vec<usize> = (0..self.design.n_columns()).collect();
        let grad = gradient_on(self.design, &resid, &cols);
        optimality_measure(&self.z, &grad, &cols, self.lambda)
    }

    pub fn into_fit(self) -> ModelFit {
        let delta_final = if self.converged { self.last_delta } else { self.full_delta() };
        let coefficients = self
            .z
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        ModelFit {
            lambda: self.lambda,
            n_columns: self.z.len(),
            mu: self.z[DesignMatrix::CONSTANT],
            coefficients,
            neg_log_lik: self.loss,
            objective: self.objective,
            converged: self.converged,
            delta_final,
            iterations: self.iterations,
            trace: self.trace,
        }
    }
}

/// Unit right singular vector for the smallest singular value of `x`, if that
/// value is negligible relative to the largest.
fn null_vector(x: &nalgebra::DMatrix<f64>) -> Option<Vec<f64>> {
    let (n, k) = x.shape();
    let x = if n < k { x.clone().insert_rows(n, k - n, 0.0) } else { x.clone() };
    let svd = x.svd(false, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let (i, &min) = sv.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    if !(max > 0.0) || min > RANK_TOL * max {
        return None;
    }
    Some(svd.v_t?.row(i).iter().copied().collect())
}

/// Minimizes `T_lambda` from `warm_start` (or `z = 0` with the intercept MLE).
/// Hitting `max_iters` returns the current iterate with `converged = false`.
pub fn solve_single(
    design: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    config: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<ModelFit> {
    let mut state = SolverState::new(design, y, lambda, config, warm_start)?;
    while state.iterations < config.max_iters {
        if state.step() == StepType::Converged {
            break;
        }
    }
    let fit = state.into_fit();
    if !fit.converged {
        log::warn!(
            "lambda={:.4e}: no convergence in {} iterations (delta={:.3e})",
            lambda,
            config.max_iters,
            fit.delta_final
        );
    }
    Ok(fit)
}

fn check_path(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(LpsError::InvalidArgument("lambda path is empty".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(LpsError::InvalidArgument("lambdas must be finite and >= 0".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LpsError::InvalidArgument("lambdas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Fits each lambda in turn, warm-starting from the previous solution.
pub fn solve_path(
    design: &DesignMatrix,
    y: &[f64],
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<ModelFit>> {
    solve_path_until(design, y, lambdas, config, |_| false)
}

/// Like [`solve_path`], but stops after the first fit for which `stop`
/// returns true (that fit is kept).
pub fn solve_path_until(
    design: &DesignMatrix,
    y: &[f64],
    lambdas: &[f64],
    config: &SolverConfig,
    mut stop: impl FnMut(&ModelFit) -> bool,
) -> Result<Vec<ModelFit>> {
    check_path(lambdas)?;
    let mut fits: Vec<ModelFit> = Vec::with_capacity(lambdas.len());
    let mut start: Option<Vec<f64>> = None;
    for &lambda in lambdas {
        let fit = solve_single(design, y, lambda, config, start.as_deref())?;
        start = Some(fit.dense());
        let done = stop(&fit);
        fits.push(fit);
        if done {
            break;
        }
    }
    Ok(fits)
}
