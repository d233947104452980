//! The two-step procedure end to end: optional univariate screening, the
//! penalized path with tuning-score selection, backward elimination, and the
//! response-scrambling false-alarm study.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};
use crate::glm::{backward_eliminate, fit_logistic, EliminationStage};
use crate::patterns::{build_design, enumerate_patterns, pattern_count, BinaryDataset, DesignMatrix, Pattern, PatternModel};
use crate::simgen::stream_rng;
use crate::solver::{lambda_grid, solve_path_until, ModelFit, SolverConfig};
use crate::tuning::{score_fit, select_lambda, write_score_csv, Criterion, ScoreRecord, Selection};

/// Whether to screen variables before enumerating patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Screening {
    /// Screen only when there are more than [`AUTO_SCREEN_ABOVE`] variables.
    Auto,
    On,
    Off,
}

pub const AUTO_SCREEN_ABOVE: usize = 30;

impl std::str::FromStr for Screening {
    type Err = LpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Screening::Auto),
            "on" => Ok(Screening::On),
            "off" => Ok(Screening::Off),
            other => Err(LpsError::InvalidArgument(format!("unknown screening mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpsConfig {
    pub solver: SolverConfig,
    pub n_lambda: usize,
    /// Smallest lambda on the grid relative to `lambda_max`.
    pub lambda_min_ratio: f64,
    pub criterion: Criterion,
    /// Upper bound on design columns (constant included).
    pub column_budget: usize,
    pub screening: Screening,
    pub screen_alpha: f64,
    /// Stop the path once a fit has more nonzero patterns than this.
    #[serde(default)]
    pub max_support: Option<usize>,
    /// Stop the path after this many consecutive fits that are unscorable or
    /// score worse than the best fit so far. `None` solves the whole grid.
    #[serde(default)]
    pub score_patience: Option<usize>,
}

impl Default for LpsConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            n_lambda: 50,
            lambda_min_ratio: 1e-4,
            criterion: Criterion::Bgacv,
            column_budget: 2_000_000,
            screening: Screening::Auto,
            screen_alpha: 0.05,
            max_support: None,
            score_patience: Some(10),
        }
    }
}

impl LpsConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.n_lambda == 0 {
            return Err(LpsError::InvalidArgument("n_lambda must be at least 1".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(LpsError::InvalidArgument("lambda_min_ratio must lie in (0, 1)".into()));
        }
        if self.score_patience == Some(0) {
            return Err(LpsError::InvalidArgument("score_patience must be at least 1".into()));
        }
        if !(self.screen_alpha > 0.0 && self.screen_alpha < 1.0) {
            return Err(LpsError::InvalidArgument("screen_alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn screens(&self, p: usize) -> bool {
        match self.screening {
            Screening::On => true,
            Screening::Off => false,
            Screening::Auto => p > AUTO_SCREEN_ABOVE,
        }
    }
}

/// Result of screening: the kept variables (original indices) and the reduced data.
#[derive(Debug, Clone)]
pub struct ScreenResult {
    pub kept: Vec<usize>,
    /// Reduced data (the input itself when nothing is kept).
    pub data: BinaryDataset,
    /// Smallest coefficient p-value per group, keyed by group id.
    pub group_p_values: BTreeMap<usize, f64>,
}

fn indicator_design(data: &BinaryDataset, vars: &[usize]) -> Result<DesignMatrix> {
    DesignMatrix::from_indicator_columns(data.n(), vars.iter().map(|&j| data.rows_with(j)).collect())
}

/// Smallest p-value of the group fit, 0 for separation, `None` when the group
/// cannot be fitted jointly.
fn group_min_p(data: &BinaryDataset, vars: &[usize], y: &[f64]) -> Option<f64> {
    let design = indicator_design(data, vars).ok()?;
    let cols: Vec<usize> = (1..=vars.len()).collect();
    match fit_logistic(&design, &cols, y) {
        Ok(fit) if fit.separation => Some(0.0),
        Ok(fit) if fit.converged => Some(fit.p_values[1..].iter().copied().fold(f64::INFINITY, f64::min)),
        Ok(_) => Some(0.0),
        Err(_) => None,
    }
}

/// Univariate logistic screening. Variables sharing a group (dummy pairs of
/// one source variable) enter one model together and are kept or dropped
/// together; a group is kept if any coefficient has p-value below `alpha`.
/// Variables constant over the rows are dropped.
pub fn screen_variables(data: &BinaryDataset, alpha: f64) -> Result<ScreenResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LpsError::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    let n = data.n();
    let y = data.y_f64();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for j in 0..data.p() {
        let ones = data.rows_with(j).len();
        if ones == 0 || ones == n {
            log::warn!("dropping constant variable `{}`", data.var_names()[j]);
            continue;
        }
        groups.entry(data.groups()[j]).or_default().push(j);
    }
    let scored: Vec<(usize, Vec<usize>, f64)> = groups
        .into_par_iter()
        .map(|(g, vars)| {
            let p = group_min_p(data, &vars, &y).unwrap_or_else(|| {
                // jointly collinear (e.g. dummies summing to one); test each alone
                vars.iter()
                    .filter_map(|&j| group_min_p(data, &[j], &y))
                    .fold(f64::INFINITY, f64::min)
            });
            (g, vars, p)
        })
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut group_p_values = BTreeMap::new();
    for (g, vars, p) in scored {
        group_p_values.insert(g, p);
        if p < alpha {
            kept.extend(vars);
        }
    }
    kept.sort_unstable();
    let reduced = if kept.is_empty() {
        log::warn!("screening removed every variable");
        data.clone()
    } else {
        data.select_variables(&kept)?
    };
    Ok(ScreenResult { kept, data: reduced, group_p_values })
}

/// One term of a reported model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportTerm {
    pub pattern: Pattern,
    pub label: String,
    pub coef: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step1Report {
    pub lambda: f64,
    pub lambda_max: f64,
    pub path_length: usize,
    pub n_columns: usize,
    pub intercept: f64,
    pub terms: Vec<ReportTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step2Report {
    pub intercept: f64,
    pub intercept_p_value: Option<f64>,
    pub terms: Vec<ReportTerm>,
    pub bgacv: f64,
    pub separation: bool,
    pub glm_fits: usize,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EliminationSummary {
    pub stage: usize,
    pub removed: Option<String>,
    /// `None` when the stage could not be scored.
    pub bgacv: Option<f64>,
    pub remaining: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub screening_secs: f64,
    pub design_secs: f64,
    pub step1_secs: f64,
    pub step2_secs: f64,
}

/// Everything a run produces. Patterns are in the input dataset's variable
/// indices even when screening removed variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpsReport {
    pub dataset_digest: String,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub var_names: Vec<String>,
    pub config: LpsConfig,
    /// Variables entering the pattern expansion (all of them without screening).
    pub screened_variables: Vec<usize>,
    pub step1: Step1Report,
    pub score_path: Vec<ScoreRecord>,
    pub step2: Step2Report,
    pub elimination: Vec<EliminationSummary>,
    pub step1_model: PatternModel,
    pub final_model: PatternModel,
    pub timing: Timing,
}

const POST_SELECTION_NOTE: &str =
    "Wald p-values are computed after data-driven selection and do not have nominal coverage";

impl LpsReport {
    pub fn write_score_path_csv<W: Write>(&self, out: W) -> Result<()> {
        write_score_csv(&self.score_path, Some(self.step1.lambda), out)
    }

    /// Elimination trace as CSV: `stage,removed_pattern,bgacv,remaining_patterns`.
    pub fn write_elimination_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stage", "removed_pattern", "bgacv", "remaining_patterns"])?;
        for s in &self.elimination {
            w.write_record([
                s.stage.to_string(),
                s.removed.clone().unwrap_or_default(),
                s.bgacv.map_or_else(|| "inf".to_string(), |b| format!("{b:.12}")),
                s.remaining.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn term(pattern: Pattern, coef: f64, p_value: Option<f64>, names: &[String]) -> ReportTerm {
    ReportTerm { label: pattern.label(names), pattern, coef, p_value }
}

fn summarize_stages(stages: &[EliminationStage], design: &DesignMatrix, map: &[usize], names: &[String]) -> Vec<EliminationSummary> {
    let label = |j: usize| design.pattern(j).remap(map).label(names);
    stages
        .iter()
        .map(|s| EliminationSummary {
            stage: s.stage,
            removed: s.removed.map(label),
            bgacv: s.bgacv.is_finite().then_some(s.bgacv),
            remaining: s.remaining.iter().map(|&j| label(j)).collect(),
        })
        .collect()
}

/// Runs screening (per config), Step 1 and Step 2 on `data` with patterns up
/// to order `q`.
pub fn run_lps(data: &BinaryDataset, q: usize, config: &LpsConfig) -> Result<LpsReport> {
    config.validate()?;
    let p = data.p();
    if q == 0 || q > p {
        return Err(LpsError::InvalidArgument(format!("q must lie in 1..={p}, got {q}")));
    }
    let t = Instant::now();
    let kept = if config.screens(p) {
        let s = screen_variables(data, config.screen_alpha)?;
        log::info!("screening kept {} of {} variables", s.kept.len(), p);
        s.kept
    } else {
        (0..p).collect()
    };
    let screening_secs = t.elapsed().as_secs_f64();
    let mut report = run_lps_on(data, &kept, q, config)?;
    report.timing.screening_secs = screening_secs;
    Ok(report)
}

/// Runs Step 1 and Step 2 using only the variables in `kept` (original
/// indices, ascending), for example a screen computed on other data. The
/// config's screening setting is ignored.
pub fn run_lps_on(data: &BinaryDataset, kept: &[usize], q: usize, config: &LpsConfig) -> Result<LpsReport> {
    config.validate()?;
    let p = data.p();
    if q == 0 || q > p {
        return Err(LpsError::InvalidArgument(format!("q must lie in 1..={p}, got {q}")));
    }
    if kept.windows(2).any(|w| w[0] >= w[1]) || kept.last().is_some_and(|&j| j >= p) {
        return Err(LpsError::InvalidArgument("kept variables must be ascending and in range".into()));
    }
    let kept = kept.to_vec();
    let names = data.var_names().to_vec();
    let mut timing = Timing::default();
    let work = if kept.is_empty() || kept.len() == p { data.clone() } else { data.select_variables(&kept)? };

    let y = data.y_f64();
    let y_sum: f64 = y.iter().sum();
    if kept.is_empty() || y_sum == 0.0 || y_sum == data.n() as f64 {
        return constant_only_report(data, q, config, kept, timing);
    }

    let t = Instant::now();
    let design = pattern_design(&work, q, config.column_budget)?;
    timing.design_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (lambdas, path) = solve_lps_path(&design, &y, config)?;
    let selection = select_lambda(&path, &design, &y, config.criterion)?;
    let chosen = &path[selection.index];
    timing.step1_secs = t.elapsed().as_secs_f64();

    let step1_terms: Vec<(Pattern, f64)> = chosen
        .coefficients
        .iter()
        .filter(|(j, _)| *j != DesignMatrix::CONSTANT)
        .map(|&(j, c)| (design.pattern(j).remap(&kept), c))
        .collect();
    let step1_model = PatternModel::new(p, chosen.mu, step1_terms)?.sorted();
    let step1 = Step1Report {
        lambda: chosen.lambda,
        lambda_max: lambdas[0],
        path_length: path.len(),
        n_columns: design.n_columns(),
        intercept: chosen.mu,
        terms: step1_model.terms.iter().map(|t| term(t.pattern.clone(), t.coef, None, &names)).collect(),
    };

    let t = Instant::now();
    let elim = backward_eliminate(&design, &chosen.support(), &y)?;
    timing.step2_secs = t.elapsed().as_secs_f64();

    let fit = &elim.final_fit;
    let mut final_terms: Vec<ReportTerm> = fit
        .pattern_columns()
        .iter()
        .enumerate()
        .map(|(k, &j)| term(design.pattern(j).remap(&kept), fit.beta[k + 1], Some(fit.p_values[k + 1]), &names))
        .collect();
    final_terms.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    let final_model = PatternModel::new(
        p,
        fit.intercept(),
        final_terms.iter().map(|t| (t.pattern.clone(), t.coef)).collect(),
    )?;
    let step2 = Step2Report {
        intercept: fit.intercept(),
        intercept_p_value: fit.p_values.first().copied(),
        terms: final_terms,
        bgacv: elim.stages[elim.best_stage].bgacv,
        separation: fit.separation,
        glm_fits: elim.fits_performed,
        note: POST_SELECTION_NOTE.into(),
    };

    Ok(LpsReport {
        dataset_digest: data.digest(),
        n: data.n(),
        p,
        q,
        var_names: names.clone(),
        config: config.clone(),
        screened_variables: kept.clone(),
        step1,
        score_path: selection.records,
        step2,
        elimination: summarize_stages(&elim.stages, &design, &kept, &names),
        step1_model,
        final_model,
        timing,
    })
}

/// All patterns of order at most `q` (capped at `p`) over `data`'s
/// variables, checked against the column budget before enumeration.
pub fn pattern_design(data: &BinaryDataset, q: usize, column_budget: usize) -> Result<DesignMatrix> {
    let q_eff = q.min(data.p());
    let n_columns = pattern_count(data.p(), q_eff) + 1;
    if n_columns > column_budget {
        return Err(LpsError::BudgetExceeded { columns: n_columns, budget: column_budget });
    }
    build_design(data, &enumerate_patterns(data.p(), q_eff)?)
}

/// Step-1 path on the config's lambda grid, truncated by `max_support` and
/// `score_patience`. Returns the full grid and the fits actually computed.
pub fn solve_lps_path(design: &DesignMatrix, y: &[f64], config: &LpsConfig) -> Result<(Vec<f64>, Vec<ModelFit>)> {
    let lambdas = lambda_grid(design, y, config.n_lambda, config.lambda_min_ratio)?;
    let mut best = f64::INFINITY;
    let mut worse = 0;
    let path = solve_path_until(design, y, &lambdas, &config.solver, |fit| {
        if config.max_support.is_some_and(|m| fit.support_size() > m) {
            return true;
        }
        let Some(patience) = config.score_patience else {
            return false;
        };
        match score_fit(fit, design, y).map(|r| r.score(config.criterion)) {
            Ok(s) if s < best => {
                best = s;
                worse = 0;
            }
            _ => worse += 1,
        }
        worse >= patience
    })?;
    Ok((lambdas, path))
}

/// A Step-1 path saved to disk, tied to its dataset by digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedPath {
    pub dataset_digest: String,
    pub q: usize,
    pub lambdas: Vec<f64>,
    pub fits: Vec<ModelFit>,
}

/// Solves the Step-1 path on all variables of `data` (no screening).
pub fn fit_path(data: &BinaryDataset, q: usize, config: &LpsConfig) -> Result<SavedPath> {
    config.validate()?;
    let design = pattern_design(data, q, config.column_budget)?;
    let (lambdas, fits) = solve_lps_path(&design, &data.y_f64(), config)?;
    Ok(SavedPath { dataset_digest: data.digest(), q, lambdas, fits })
}

/// Scores a saved path against the data it was fitted on.
pub fn tune_path(data: &BinaryDataset, saved: &SavedPath, criterion: Criterion) -> Result<Selection> {
    if data.digest() != saved.dataset_digest {
        return Err(LpsError::InvalidArgument("saved path was fitted on a different dataset".into()));
    }
    let design = pattern_design(data, saved.q, usize::MAX)?;
    if saved.fits.iter().any(|f| f.n_columns != design.n_columns()) {
        return Err(LpsError::InvalidArgument("saved path does not match the pattern design".into()));
    }
    select_lambda(&saved.fits, &design, &data.y_f64(), criterion)
}

/// Report for data with nothing to fit: a constant response or no variables
/// left after screening.
fn constant_only_report(
    data: &BinaryDataset,
    q: usize,
    config: &LpsConfig,
    kept: Vec<usize>,
    timing: Timing,
) -> Result<LpsReport> {
    let y = data.y_f64();
    let design = DesignMatrix::from_indicator_columns(data.n(), vec![])?;
    let fit = fit_logistic(&design, &[], &y)?;
    if fit.separation {
        log::warn!("response is constant; the null fit is separated");
    }
    let p = data.p();
    let obs = fit.deviance / (2.0 * data.n() as f64);
    Ok(LpsReport {
        dataset_digest: data.digest(),
        n: data.n(),
        p,
        q,
        var_names: data.var_names().to_vec(),
        config: config.clone(),
        screened_variables: kept,
        step1: Step1Report {
            lambda: 0.0,
            lambda_max: 0.0,
            path_length: 0,
            n_columns: 1,
            intercept: fit.intercept(),
            terms: vec![],
        },
        score_path: vec![],
        step2: Step2Report {
            intercept: fit.intercept(),
            intercept_p_value: fit.p_values.first().copied(),
            terms: vec![],
            bgacv: obs,
            separation: fit.separation,
            glm_fits: 1,
            note: POST_SELECTION_NOTE.into(),
        },
        elimination: vec![EliminationSummary { stage: 0, removed: None, bgacv: Some(obs), remaining: vec![] }],
        step1_model: PatternModel::null(p, fit.intercept()),
        final_model: PatternModel::null(p, fit.intercept()),
        timing,
    })
}

/// Patterns found on scrambled responses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScrambleTable {
    pub reps: usize,
    pub seed: u64,
    /// Number of discovered patterns of each order, summed over scrambles.
    pub by_order: BTreeMap<usize, usize>,
    /// How often each pattern was discovered.
    pub patterns: BTreeMap<String, usize>,
    /// Patterns discovered in each scramble.
    pub per_rep: Vec<usize>,
}

impl ScrambleTable {
    pub fn total(&self) -> usize {
        self.per_rep.iter().sum()
    }

    /// CSV with columns `order,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["order", "count"])?;
        for (o, c) in &self.by_order {
            w.write_record([o.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Permutation of `0..n` drawn for scramble `rep`; never the identity when `n > 1`.
pub fn scramble_permutation(n: usize, seed: u64, rep: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, rep);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if n <= 1 || perm.iter().enumerate().any(|(i, &k)| i != k) {
            return perm;
        }
    }
}

/// Reruns the whole procedure on `reps` random permutations of the response
/// and tallies the patterns that survive.
pub fn scramble_study(
    data: &BinaryDataset,
    q: usize,
    config: &LpsConfig,
    reps: usize,
    seed: u64,
) -> Result<ScrambleTable> {
    if reps == 0 {
        return Err(LpsError::InvalidArgument("reps must be at least 1".into()));
    }
    let names = data.var_names().to_vec();
    let found: Vec<Vec<Pattern>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let perm = scramble_permutation(data.n(), seed, rep);
            let y: Vec<u8> = perm.iter().map(|&i| data.y()[i]).collect();
            let report = run_lps(&data.with_response(y)?, q, config)?;
            Ok(report.final_model.patterns().cloned().collect())
        })
        .collect::<Result<_>>()?;
    let mut by_order = BTreeMap::new();
    let mut patterns = BTreeMap::new();
    for pats in &found {
        for pt in pats {
            *by_order.entry(pt.order()).or_insert(0) += 1;
            *patterns.entry(pt.label(&names)).or_insert(0) += 1;
        }
    }
    Ok(ScrambleTable { reps, seed, by_order, patterns, per_rep: found.iter().map(Vec::len).collect() })
}
