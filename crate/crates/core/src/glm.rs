//! Unpenalized logistic regression on a handful of pattern columns, and
//! BGACV-driven backward elimination over the patterns that survive the
//! penalized step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{LpsError, Result};
use crate::patterns::{DesignMatrix, Pattern, PatternModel};
use crate::solver::{intercept_mle, log1pexp, probabilities, variances};
use crate::tuning::{score_logits, ScoreRecord};

pub const IRLS_TOL: f64 = 1e-10;
pub const IRLS_MAX_ITERS: usize = 100;
/// Logit magnitude past which a still-improving fit is treated as separated.
pub const SEPARATION_LOGIT: f64 = 30.0;

/// Maximum-likelihood logistic fit on the constant plus `columns`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmFit {
    /// Design columns, constant first.
    pub columns: Vec<usize>,
    /// Coefficients aligned with `columns` (intercept first).
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided Wald p-values; post-selection, so not honest inference.
    pub p_values: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub separation: bool,
    pub iterations: usize,
    /// Infinity norm of the log-likelihood gradient at `beta`.
    pub grad_norm: f64,
}

impl GlmFit {
    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    /// Pattern columns (constant excluded).
    pub fn pattern_columns(&self) -> &[usize] {
        &self.columns[1..]
    }

    pub fn logits(&self, design: &DesignMatrix) -> Vec<f64> {
        let coefs: Vec<(usize, f64)> = self.columns.iter().copied().zip(self.beta.iter().copied()).collect();
        design.logits(&coefs)
    }

    pub fn to_pattern_model(&self, design: &DesignMatrix, n_vars: usize) -> Result<PatternModel> {
        let terms = self
            .pattern_columns()
            .iter()
            .zip(&self.beta[1..])
            .map(|(&j, &c)| (design.pattern(j).clone(), c))
            .collect();
        PatternModel::new(n_vars, self.intercept(), terms).map(PatternModel::sorted)
    }
}

/// Checks that the columns (constant first) are linearly independent over the
/// rows, naming the first dependent pattern otherwise.
fn check_rank(design: &DesignMatrix, cols: &[usize]) -> Result<()> {
    let gram = design.weighted_gram(cols, &vec![1.0; design.n()]);
    let k = cols.len();
    // column-by-column Cholesky; a vanishing pivot marks a dependent column
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut d = gram[(j, j)];
        for m in 0..j {
            d -= l[(j, m)] * l[(j, m)];
        }
        if d <= 1e-9 * gram[(j, j)].max(1.0) {
            return Err(LpsError::Collinear { pattern: design.pattern(cols[j]).to_string() });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..k {
            let mut s = gram[(i, j)];
            for m in 0..j {
                s -= l[(i, m)] * l[(j, m)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(())
}

fn deviance(f: &[f64], y: &[f64]) -> f64 {
    2.0 * f.iter().zip(y).map(|(&fi, &yi)| log1pexp(fi) - yi * fi).sum::<f64>()
}

/// Fits `logit P(y=1) = beta_0 + sum beta_j B_j` by iteratively reweighted
/// least squares (Newton with step halving).
pub fn fit_logistic(design: &DesignMatrix, columns: &[usize], y: &[f64]) -> Result<GlmFit> {
    let cols: Vec<usize> = std::iter::once(DesignMatrix::CONSTANT)
        .chain(columns.iter().copied().filter(|&j| j != DesignMatrix::CONSTANT))
        .collect();
    check_rank(design, &cols)?;
    let k = cols.len();
    let n = design.n();

    let mut beta = vec![0.0; k];
    beta[0] = intercept_mle(y);
    let logits_of = |b: &[f64]| {
        let coefs: Vec<(usize, f64)> = cols.iter().copied().zip(b.iter().copied()).collect();
        design.logits(&coefs)
    };
    let mut f = logits_of(&beta);
    let mut dev = deviance(&f, y);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    while iterations < IRLS_MAX_ITERS {
        iterations += 1;
        let prob = probabilities(&f);
        let resid: Vec<f64> = y.iter().zip(&prob).map(|(yi, pi)| yi - pi).collect();
        let grad = DVector::from_iterator(k, cols.iter().map(|&j| design.dot(j, &resid)));
        let info = design.weighted_gram(&cols, &variances(&prob));
        let Some(chol) = info.clone().cholesky() else {
            separation = true;
            break;
        };
        let delta = chol.solve(&grad);

        let mut scale = 1.0;
        let (new_beta, new_f, new_dev) = loop {
            let nb: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + scale * d).collect();
            let nf = logits_of(&nb);
            let nd = deviance(&nf, y);
            if nd <= dev || scale < 1e-10 {
                break (nb, nf, nd);
            }
            scale *= 0.5;
        };
        let improvement = dev - new_dev;
        beta = new_beta;
        f = new_f;
        let max_abs = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs > SEPARATION_LOGIT && improvement > 0.0 {
            separation = true;
            dev = new_dev;
            break;
        }
        let rel = improvement.abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        let step = delta.amax() * scale;
        if rel < IRLS_TOL && step < 1e-8 * (1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()))) {
            converged = true;
            break;
        }
    }

    let prob = probabilities(&f);
    let resid: Vec<f64> = y.iter().zip(&prob).map(|(yi, pi)| yi - pi).collect();
    let grad_norm = cols.iter().map(|&j| design.dot(j, &resid).abs()).fold(0.0, f64::max);
    let info = design.weighted_gram(&cols, &variances(&prob));
    let std_errors: Vec<f64> = match info.try_inverse() {
        Some(inv) if !separation => (0..k).map(|i| inv[(i, i)].max(0.0).sqrt()).collect(),
        _ => vec![f64::NAN; k],
    };
    let p_values = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| {
            if se.is_finite() && *se > 0.0 {
                erfc((b / se).abs() / std::f64::consts::SQRT_2)
            } else {
                f64::NAN
            }
        })
        .collect();
    if converged && grad_norm > 1e-8 * n as f64 {
        log::debug!("IRLS converged with gradient norm {grad_norm:.3e}");
    }
    Ok(GlmFit {
        columns: cols,
        beta,
        std_errors,
        p_values,
        deviance: dev,
        converged: converged && !separation,
        separation,
        iterations,
        grad_norm,
    })
}

/// GACV/BGACV record for a parametric fit, `H = B_s (B_s' W B_s)^{-1} B_s'`.
pub fn parametric_scores(fit: &GlmFit, design: &DesignMatrix, y: &[f64]) -> Result<ScoreRecord> {
    if !fit.converged {
        return Err(LpsError::Scoring("logistic fit did not converge".into()));
    }
    score_logits(design, y, &fit.logits(design), &fit.columns, fit.columns.len() - 1, 0.0)
}

pub fn bgacv_parametric(fit: &GlmFit, design: &DesignMatrix, y: &[f64]) -> Result<f64> {
    parametric_scores(fit, design, y).map(|r| r.bgacv)
}

/// One step of backward elimination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EliminationStage {
    pub stage: usize,
    /// Column removed to reach this stage (`None` for the starting model).
    pub removed: Option<usize>,
    /// BGACV of this stage's model (infinite when unscorable).
    pub bgacv: f64,
    pub remaining: Vec<usize>,
    /// `(column, BGACV after removing it)` for every candidate tried to reach
    /// the next stage.
    pub candidates: Vec<(usize, f64)>,
    #[serde(skip)]
    fit: Option<GlmFit>,
}

#[derive(Debug, Clone)]
pub struct Elimination {
    pub stages: Vec<EliminationStage>,
    pub best_stage: usize,
    pub final_fit: GlmFit,
    /// Number of logistic fits performed.
    pub fits_performed: usize,
}

impl Elimination {
    pub fn final_columns(&self) -> &[usize] {
        &self.stages[self.best_stage].remaining
    }

    /// Elimination trace as CSV: `stage,removed_pattern,bgacv,remaining_patterns`.
    pub fn write_csv<W: std::io::Write>(&self, design: &DesignMatrix, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stage", "removed_pattern", "bgacv", "remaining_patterns"])?;
        for s in &self.stages {
            let removed = s.removed.map(|j| design.pattern(j).label(names)).unwrap_or_default();
            let remaining = s
                .remaining
                .iter()
                .map(|&j| design.pattern(j).label(names))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([s.stage.to_string(), removed, format!("{:.12}", s.bgacv), remaining])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn stage_score(design: &DesignMatrix, cols: &[usize], y: &[f64]) -> (f64, Option<GlmFit>) {
    match fit_logistic(design, cols, y) {
        Ok(fit) if fit.converged => match bgacv_parametric(&fit, design, y) {
            Ok(s) if s.is_finite() => (s, Some(fit)),
            _ => (f64::INFINITY, Some(fit)),
        },
        Ok(fit) => (f64::INFINITY, Some(fit)),
        Err(e) => {
            log::debug!("refit on {cols:?} failed: {e}");
            (f64::INFINITY, None)
        }
    }
}

/// Removal preference among equal scores: higher order first, then the
/// lexicographically last pattern.
fn prefer_removal(a: &Pattern, b: &Pattern) -> std::cmp::Ordering {
    a.cmp(b)
}

/// Removes one pattern at a time (the one whose removal gives the lowest
/// BGACV) until none remain, then returns the stage with the lowest BGACV.
pub fn backward_eliminate(design: &DesignMatrix, start: &[usize], y: &[f64]) -> Result<Elimination> {
    let mut remaining: Vec<usize> = start.iter().copied().filter(|&j| j != DesignMatrix::CONSTANT).collect();
    remaining.sort_unstable();
    remaining.dedup();

    let (score0, fit0) = stage_score(design, &remaining, y);
    let mut fits_performed = 1;
    let mut stages = vec![EliminationStage {
        stage: 0,
        removed: None,
        bgacv: score0,
        remaining: remaining.clone(),
        candidates: Vec::new(),
        fit: fit0,
    }];

    while !remaining.is_empty() {
        let trials: Vec<(usize, f64, Option<GlmFit>)> = remaining
            .par_iter()
            .map(|&drop| {
                let cols: Vec<usize> = remaining.iter().copied().filter(|&j| j != drop).collect();
                let (s, fit) = stage_score(design, &cols, y);
                (drop, s, fit)
            })
            .collect();
        fits_performed += trials.len();
        stages.last_mut().expect("stage").candidates = trials.iter().map(|(j, s, _)| (*j, *s)).collect();

        let Some((drop, score, fit)) = trials
            .into_iter()
            .filter(|(_, s, _)| s.is_finite())
            .min_by(|(ja, sa, _), (jb, sb, _)| {
                sa.total_cmp(sb)
                    .then_with(|| prefer_removal(design.pattern(*jb), design.pattern(*ja)))
            })
        else {
            log::warn!(
                "every refit failed with {} patterns left; stopping elimination",
                remaining.len()
            );
            break;
        };
        remaining.retain(|&j| j != drop);
        stages.push(EliminationStage {
            stage: stages.len(),
            removed: Some(drop),
            bgacv: score,
            remaining: remaining.clone(),
            candidates: Vec::new(),
            fit,
        });
    }

    // global minimum; ties go to the sparser (later) stage
    let best_stage = stages
        .iter()
        .enumerate()
        .filter(|(_, s)| s.bgacv.is_finite())
        .min_by(|(ia, a), (ib, b)| a.bgacv.total_cmp(&b.bgacv).then_with(|| ib.cmp(ia)))
        .map(|(i, _)| i);
    let (best_stage, final_fit) = match best_stage {
        Some(i) => (i, stages[i].fit.clone().expect("scored stage keeps its fit")),
        None => {
            // nothing scorable; fall back to the constant-only model
            let fit = fit_logistic(design, &[], y)?;
            fits_performed += 1;
            (stages.len() - 1, fit)
        }
    };
    Ok(Elimination { stages, best_stage, final_fit, fits_performed })
}
