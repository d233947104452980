//! Seeded generators for the simulation designs and a replication harness
//! that tallies how often the true patterns (and anything else) are selected.
//!
//! Every generator draws from a ChaCha8 stream keyed by `(seed, stream)`, so a
//! dataset is bit-identical for a given seed and replicate index.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};
use crate::patterns::{BinaryDataset, Pattern, PatternModel};
use crate::pipeline::{run_lps, run_lps_on, screen_variables, LpsConfig};
use crate::solver::sigmoid;

/// RNG for replicate `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multivariate normal sampler via the Cholesky factor of the covariance.
#[derive(Debug, Clone)]
pub struct CorrelatedNormal {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl CorrelatedNormal {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(LpsError::InvalidArgument("covariance shape mismatch".into()));
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| LpsError::InvalidArgument("covariance is not positive definite".into()))?;
        Ok(Self { mean: DVector::from_vec(mean), factor: chol.unpack() })
    }

    /// Unit variances with common pairwise correlation `rho` in `[0, 1)`.
    pub fn equicorrelated(dim: usize, mean: f64, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(LpsError::InvalidArgument(format!("correlation {rho} outside [0, 1)")));
        }
        let cov = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
        Self::new(vec![mean; dim], cov)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_iterator(self.mean.len(), (0..self.mean.len()).map(|_| rng.sample(StandardNormal)));
        &self.mean + &self.factor * z
    }
}

fn names(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("{prefix}{j}")).collect()
}

fn pat(ix: &[usize]) -> Pattern {
    Pattern::one_based(ix).expect("valid literal pattern")
}

fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> u8 {
    (rng.gen::<f64>() < p) as u8
}

/// Draws `y_i ~ Bernoulli(logistic(f(x_i)))` for every row.
pub fn sample_response<R: Rng>(rng: &mut R, model: &PatternModel, x: &[u8], p: usize) -> Vec<u8> {
    x.chunks_exact(p)
        .map(|row| bernoulli(rng, sigmoid(model.logit_unchecked(row))))
        .collect()
}

/// Fresh responses for the rows of `data` under `model`, from stream `stream`.
pub fn resample_response(data: &BinaryDataset, model: &PatternModel, seed: u64, stream: u64) -> Result<BinaryDataset> {
    let mut rng = stream_rng(seed, stream);
    let x: Vec<u8> = data.rows().flatten().copied().collect();
    data.with_response(sample_response(&mut rng, model, &x, data.p()))
}

/// Three independent pairs of thresholded bivariate normals (correlation 0.7)
/// plus an independent fair coin; logit `-2 + 1.5 B1 + 1.5 B23 + 2 B456`.
pub fn gen_example1(n: usize, seed: u64) -> Result<(BinaryDataset, PatternModel)> {
    gen_example1_stream(n, seed, 0)
}

fn gen_example1_stream(n: usize, seed: u64, stream: u64) -> Result<(BinaryDataset, PatternModel)> {
    let truth = PatternModel::new(7, -2.0, vec![(pat(&[1]), 1.5), (pat(&[2, 3]), 1.5), (pat(&[4, 5, 6]), 2.0)])?;
    let mut rng = stream_rng(seed, stream);
    let pair = CorrelatedNormal::equicorrelated(2, 0.0, 0.7)?;
    let mut x = vec![0u8; n * 7];
    for row in x.chunks_exact_mut(7) {
        for k in 0..3 {
            let v = pair.sample(&mut rng);
            row[k] = (v[0] > 0.0) as u8;
            row[k + 3] = (v[1] > 0.0) as u8;
        }
        row[6] = bernoulli(&mut rng, 0.5);
    }
    let y = sample_response(&mut rng, &truth, &x, 7);
    Ok((BinaryDataset::from_flat(n, 7, x, y, names("x", 7))?, truth))
}

/// Probability that a copied variable is redrawn as 1 instead.
const NOISE_COPY_P: f64 = 0.84;

fn correlated_block<R: Rng>(rng: &mut R, normal: &CorrelatedNormal, copy_p: f64, row: &mut [u8]) {
    let v = normal.sample(rng);
    for i in 0..4 {
        row[i] = (v[i] > 0.0) as u8;
    }
    for i in 0..4 {
        row[i + 4] = if rng.gen::<f64>() < copy_p { row[i] } else { bernoulli(rng, NOISE_COPY_P) };
    }
}

/// Four thresholded normals (mean 1, pairwise correlation 0.7) and four
/// partial copies (`X_{i+4} = X_i` with probability `rho`); logit
/// `-2 + 2 B1234`.
pub fn gen_example2(n: usize, rho: f64, seed: u64) -> Result<(BinaryDataset, PatternModel)> {
    gen_example2_stream(n, rho, seed, 0)
}

fn gen_example2_stream(n: usize, rho: f64, seed: u64, stream: u64) -> Result<(BinaryDataset, PatternModel)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(LpsError::InvalidArgument(format!("rho {rho} outside [0, 1]")));
    }
    let truth = PatternModel::new(8, -2.0, vec![(pat(&[1, 2, 3, 4]), 2.0)])?;
    let mut rng = stream_rng(seed, stream);
    let normal = CorrelatedNormal::equicorrelated(4, 1.0, 0.7)?;
    let mut x = vec![0u8; n * 8];
    for row in x.chunks_exact_mut(8) {
        correlated_block(&mut rng, &normal, rho, row);
    }
    let y = sample_response(&mut rng, &truth, &x, 8);
    Ok((BinaryDataset::from_flat(n, 8, x, y, names("x", 8))?, truth))
}

/// Example 2's block with within-block correlation `rho1` and copy
/// probability `rho2`, plus twelve fair coins; logit
/// `-2 + 2 B9 + 2 B67 + 2 B1234`.
pub fn gen_example3(n: usize, rho1: f64, rho2: f64, seed: u64) -> Result<(BinaryDataset, PatternModel)> {
    gen_example3_stream(n, rho1, rho2, seed, 0)
}

fn gen_example3_stream(
    n: usize,
    rho1: f64,
    rho2: f64,
    seed: u64,
    stream: u64,
) -> Result<(BinaryDataset, PatternModel)> {
    if !(0.0..=1.0).contains(&rho2) {
        return Err(LpsError::InvalidArgument(format!("rho2 {rho2} outside [0, 1]")));
    }
    let truth = PatternModel::new(
        20,
        -2.0,
        vec![(pat(&[9]), 2.0), (pat(&[6, 7]), 2.0), (pat(&[1, 2, 3, 4]), 2.0)],
    )?;
    let mut rng = stream_rng(seed, stream);
    let normal = CorrelatedNormal::equicorrelated(4, 1.0, rho1)?;
    let mut x = vec![0u8; n * 20];
    for row in x.chunks_exact_mut(20) {
        correlated_block(&mut rng, &normal, rho2, &mut row[..8]);
        for v in &mut row[8..] {
            *v = bernoulli(&mut rng, 0.5);
        }
    }
    let y = sample_response(&mut rng, &truth, &x, 20);
    Ok((BinaryDataset::from_flat(n, 20, x, y, names("x", 20))?, truth))
}

/// Attribute frequencies for the SNP-style generator. The real genotype data
/// is not available, so these are stand-ins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GawConfig {
    pub n_snps: usize,
    /// P(one variant allele) for SNPs outside the generating model.
    pub freq_one_variant: f64,
    /// P(two variant alleles) for SNPs outside the generating model.
    pub freq_two_variant: f64,
    /// `(snp, P(one variant), P(two variants))` overrides for individual SNPs.
    pub snp_freqs: Vec<(usize, f64, f64)>,
    pub p_age_55_plus: f64,
    pub p_female: f64,
    pub p_smoking: f64,
}

impl Default for GawConfig {
    fn default() -> Self {
        Self {
            n_snps: 674,
            freq_one_variant: 0.25,
            freq_two_variant: 0.05,
            snp_freqs: DEFAULT_MODEL_SNP_FREQS.to_vec(),
            p_age_55_plus: 0.5,
            p_female: 0.5,
            p_smoking: 0.5,
        }
    }
}

/// Genotype frequencies of the SNPs in the generating model, set so that the
/// model's incidence is close to the 1500/3500 case fraction of the sample the
/// coefficients were estimated on.
pub const DEFAULT_MODEL_SNP_FREQS: [(usize, f64, f64); 7] = [
    (108, 0.30, 0.40),
    (153, 0.35, 0.45),
    (154, 0.30, 0.60),
    (162, 0.50, 0.10),
    (334, 0.30, 0.40),
    (490, 0.30, 0.20),
    (553, 0.30, 0.20),
];

/// SNPs (1-based numbers) that enter the generating model.
pub const GAW_MODEL_SNPS: [usize; 7] = [108, 153, 154, 162, 334, 490, 553];

/// Column index (0-based) of SNP `snp`'s dummy for `level` (1 or 2 variant
/// alleles). Columns are `age, sex, smoking`, then two dummies per SNP.
pub fn gaw_column(snp: usize, level: usize) -> usize {
    3 + 2 * (snp - 1) + (level - 1)
}

pub const GAW_SEX: usize = 1;
pub const GAW_SMOKING: usize = 2;

/// The generating model: the fitted main effects and second-order patterns
/// plus an added third-order pattern `sex × SNP6_108_2 × SNP6_334_2`.
pub fn gaw_true_model(n_vars: usize) -> Result<PatternModel> {
    let p = |ix: &[usize]| {
        let mut v = ix.to_vec();
        v.sort_unstable();
        Pattern::new(v).expect("valid")
    };
    let c = gaw_column;
    PatternModel::new(
        n_vars,
        -4.8546,
        vec![
            (p(&[GAW_SMOKING]), 0.8603),
            (p(&[c(153, 1)]), 1.8911),
            (p(&[c(162, 1)]), 2.2013),
            (p(&[c(154, 2)]), 0.7700),
            (p(&[GAW_SEX, c(153, 1)]), 0.7848),
            (p(&[GAW_SEX, c(154, 2)]), 0.9330),
            (p(&[c(153, 2), c(154, 2)]), 4.5877),
            (p(&[c(153, 1), c(553, 2)]), 0.4021),
            (p(&[c(154, 2), c(490, 1)]), 0.3888),
            (p(&[GAW_SEX, c(108, 2), c(334, 2)]), 3.0),
        ],
    )
    .map(PatternModel::sorted)
}

/// The added third-order pattern.
pub fn gaw_third_order_pattern() -> Pattern {
    Pattern::new(vec![GAW_SEX, gaw_column(108, 2), gaw_column(334, 2)]).expect("valid")
}

/// Wide SNP-style data: three environment variables and one-/two-variant
/// dummy pairs per SNP (grouped for screening), responses from
/// [`gaw_true_model`].
pub fn gen_gaw_style(n: usize, seed: u64, cfg: &GawConfig) -> Result<(BinaryDataset, PatternModel)> {
    gen_gaw_stream(n, seed, 0, cfg)
}

fn gen_gaw_stream(n: usize, seed: u64, stream: u64, cfg: &GawConfig) -> Result<(BinaryDataset, PatternModel)> {
    if cfg.n_snps < *GAW_MODEL_SNPS.iter().max().unwrap() {
        return Err(LpsError::InvalidArgument(format!(
            "n_snps must be at least {} to hold the generating model",
            GAW_MODEL_SNPS.iter().max().unwrap()
        )));
    }
    let pairs = std::iter::once((cfg.freq_one_variant, cfg.freq_two_variant))
        .chain(cfg.snp_freqs.iter().map(|&(_, a, b)| (a, b)));
    for (a, b) in pairs {
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
            return Err(LpsError::InvalidArgument("genotype frequencies must sum to at most 1".into()));
        }
    }
    let p = 3 + 2 * cfg.n_snps;
    let truth = gaw_true_model(p)?;
    let mut freqs = vec![(cfg.freq_one_variant, cfg.freq_two_variant); cfg.n_snps + 1];
    for &(snp, a, b) in &cfg.snp_freqs {
        if snp == 0 || snp > cfg.n_snps {
            return Err(LpsError::InvalidArgument(format!("SNP {snp} out of range")));
        }
        freqs[snp] = (a, b);
    }
    let mut rng = stream_rng(seed, stream);
    let mut x = vec![0u8; n * p];
    for row in x.chunks_exact_mut(p) {
        row[0] = bernoulli(&mut rng, cfg.p_age_55_plus);
        row[GAW_SEX] = bernoulli(&mut rng, cfg.p_female);
        row[GAW_SMOKING] = bernoulli(&mut rng, cfg.p_smoking);
        for snp in 1..=cfg.n_snps {
            let (f1, f2) = freqs[snp];
            let u: f64 = rng.gen();
            row[gaw_column(snp, 1)] = (u < f1) as u8;
            row[gaw_column(snp, 2)] = (u >= f1 && u < f1 + f2) as u8;
        }
    }
    let y = sample_response(&mut rng, &truth, &x, p);

    let mut var_names = vec!["age".to_string(), "sex".to_string(), "smoking".to_string()];
    let mut notes = vec![
        "1 = age >= 55".to_string(),
        "1 = female".to_string(),
        "1 = smoker".to_string(),
    ];
    let mut groups = vec![0, 1, 2];
    for snp in 1..=cfg.n_snps {
        for level in 1..=2 {
            var_names.push(format!("SNP6_{snp}_{level}"));
            notes.push(format!("1 = {level} variant allele(s)"));
            groups.push(2 + snp);
        }
    }
    let data = BinaryDataset::from_flat(n, p, x, y, var_names)?
        .with_coding_notes(notes)?
        .with_groups(groups)?;
    Ok((data, truth))
}

/// Attribute marginals for the seven-risk-factor myopia-shaped generator
/// (`sex, inc, jomyop, catct, pky, asa, vtm`, each coded 1 = risky).
pub const MYOPIA_MARGINALS: [f64; 7] = [0.45, 0.50, 0.15, 0.1416, 0.2546, 0.60, 0.6553];
pub const MYOPIA_NAMES: [&str; 7] = ["sex", "inc", "jomyop", "catct", "pky", "asa", "vtm"];

/// Incidence `P(y = 1)` under independent attributes with the given marginals,
/// by exact enumeration of `{0,1}^p`.
pub fn exact_incidence(model: &PatternModel, marginals: &[f64]) -> f64 {
    let p = marginals.len();
    let mut total = 0.0;
    let mut x = vec![0u8; p];
    for mask in 0u32..(1 << p) {
        let mut w = 1.0;
        for j in 0..p {
            x[j] = ((mask >> j) & 1) as u8;
            w *= if x[j] == 1 { marginals[j] } else { 1.0 - marginals[j] };
        }
        total += w * sigmoid(model.logit_unchecked(&x));
    }
    total
}

/// Seven independent risk factors with a sparse generating model shaped like
/// the fitted myopic-change model; the intercept is calibrated so that the
/// population incidence equals `incidence`.
pub fn gen_myopia_shaped(n: usize, incidence: f64, seed: u64) -> Result<(BinaryDataset, PatternModel)> {
    if !(incidence > 0.0 && incidence < 1.0) {
        return Err(LpsError::InvalidArgument("incidence must lie in (0, 1)".into()));
    }
    // catct, pky×vtm, sex×inc×jomyop×asa, sex×inc×catct×asa
    let terms = vec![
        (pat(&[4]), 2.42),
        (pat(&[5, 7]), 1.11),
        (pat(&[1, 2, 3, 6]), 1.98),
        (pat(&[1, 2, 4, 6]), 1.15),
    ];
    let mut model = PatternModel::new(7, 0.0, terms)?;
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        model.intercept = 0.5 * (lo + hi);
        if exact_incidence(&model, &MYOPIA_MARGINALS) < incidence {
            lo = model.intercept;
        } else {
            hi = model.intercept;
        }
    }
    let mut rng = stream_rng(seed, 0);
    let mut x = vec![0u8; n * 7];
    for row in x.chunks_exact_mut(7) {
        for (v, &m) in row.iter_mut().zip(&MYOPIA_MARGINALS) {
            *v = bernoulli(&mut rng, m);
        }
    }
    let y = sample_response(&mut rng, &model, &x, 7);
    let data = BinaryDataset::from_flat(n, 7, x, y, MYOPIA_NAMES.iter().map(|s| s.to_string()).collect())?;
    Ok((data, model))
}

/// Which simulation design to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "lowercase")]
pub enum Example {
    Ex1,
    Ex2 { rho: f64 },
    Ex3 { rho1: f64, rho2: f64 },
    Gaw(GawConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub example: Example,
    pub n: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn ex1(seed: u64) -> Self {
        Self { example: Example::Ex1, n: 800, seed }
    }

    pub fn ex2(rho: f64, seed: u64) -> Self {
        Self { example: Example::Ex2 { rho }, n: 2000, seed }
    }

    pub fn ex3(rho1: f64, rho2: f64, seed: u64) -> Self {
        Self { example: Example::Ex3 { rho1, rho2 }, n: 2000, seed }
    }

    pub fn gaw(seed: u64) -> Self {
        Self { example: Example::Gaw(GawConfig::default()), n: 3500, seed }
    }

    /// Maximum pattern order used for this design.
    pub fn default_q(&self) -> usize {
        match self.example {
            Example::Ex1 => 7,
            Example::Ex2 { .. } => 8,
            Example::Ex3 { .. } => 4,
            Example::Gaw(_) => 3,
        }
    }

    /// Dataset for replicate `index`.
    pub fn generate(&self, index: u64) -> Result<(BinaryDataset, PatternModel)> {
        match &self.example {
            Example::Ex1 => gen_example1_stream(self.n, self.seed, index),
            Example::Ex2 { rho } => gen_example2_stream(self.n, *rho, self.seed, index),
            Example::Ex3 { rho1, rho2 } => gen_example3_stream(self.n, *rho1, *rho2, self.seed, index),
            Example::Gaw(cfg) => gen_gaw_stream(self.n, self.seed, index, cfg),
        }
    }

    pub fn label(&self) -> String {
        match &self.example {
            Example::Ex1 => "ex1".into(),
            Example::Ex2 { rho } => format!("ex2 rho={rho}"),
            Example::Ex3 { rho1, rho2 } => format!("ex3 rho1={rho1} rho2={rho2}"),
            Example::Gaw(_) => "gaw".into(),
        }
    }
}

/// Selected patterns of one replicate, split into true and noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: u64,
    pub selected: Vec<Pattern>,
    pub noise: Vec<Pattern>,
    pub step1_selected: Vec<Pattern>,
}

/// Detection counts over replicates; a true pattern counts only on exact match.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub setting: String,
    pub reps: usize,
    pub true_patterns: Vec<Pattern>,
    pub var_names: Vec<String>,
    pub detections: Vec<usize>,
    pub noise_total: usize,
    /// Same tallies for the Step-1 (penalized) selection alone.
    pub step1_detections: Vec<usize>,
    pub step1_noise_total: usize,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl FrequencyTable {
    pub fn detections_of(&self, pattern: &Pattern) -> Option<usize> {
        self.true_patterns.iter().position(|p| p == pattern).map(|k| self.detections[k])
    }

    /// One row per method: `setting,method,<true pattern columns>...,other`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["setting".to_string(), "method".to_string()];
        header.extend(self.true_patterns.iter().map(|p| p.label(&self.var_names)));
        header.push("other".into());
        w.write_record(&header)?;
        for (method, det, noise) in [
            ("step1", &self.step1_detections, self.step1_noise_total),
            ("lps", &self.detections, self.noise_total),
        ] {
            let mut row = vec![self.setting.clone(), method.to_string()];
            row.extend(det.iter().map(|d| d.to_string()));
            row.push(noise.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First stream of the analysis responses in SNP-style replicates.
pub const GAW_ANALYSIS_STREAM: u64 = 1 << 32;

/// Runs the full pipeline on `reps` independent replicates of `spec`.
///
/// For the SNP-style design the variables are screened on the generated
/// response and the procedure then runs on the screened variables with an
/// independent response drawn for the same subjects, so screening does not
/// select null SNPs for their chance association with the analysed response.
pub fn replicate(spec: &SimSpec, reps: usize, config: &LpsConfig) -> Result<FrequencyTable> {
    if reps == 0 {
        return Err(LpsError::InvalidArgument("reps must be at least 1".into()));
    }
    let q = spec.default_q();
    let outcomes: Vec<(ReplicateOutcome, PatternModel, Vec<String>)> = (0..reps as u64)
        .into_par_iter()
        .map(|index| {
            let (data, truth) = spec.generate(index)?;
            let outcome = match spec.example {
                Example::Gaw(_) => {
                    let screened = screen_variables(&data, config.screen_alpha)?;
                    let analysis = resample_response(&data, &truth, spec.seed, GAW_ANALYSIS_STREAM + index)?;
                    run_lps_on(&analysis, &screened.kept, q, config)?
                }
                _ => run_lps(&data, q, config)?,
            };
            let truth_set: Vec<&Pattern> = truth.patterns().collect();
            let selected: Vec<Pattern> = outcome.final_model.patterns().cloned().collect();
            let noise = selected.iter().filter(|p| !truth_set.contains(p)).cloned().collect();
            let step1_selected = outcome.step1_model.patterns().cloned().collect();
            Ok((
                ReplicateOutcome { index, selected, noise, step1_selected },
                truth,
                data.var_names().to_vec(),
            ))
        })
        .collect::<Result<_>>()?;

    let truth = &outcomes[0].1;
    let true_patterns: Vec<Pattern> = truth.patterns().cloned().collect();
    let mut detections = vec![0; true_patterns.len()];
    let mut step1_detections = vec![0; true_patterns.len()];
    let mut noise_total = 0;
    let mut step1_noise_total = 0;
    for (o, _, _) in &outcomes {
        for (k, tp) in true_patterns.iter().enumerate() {
            detections[k] += o.selected.contains(tp) as usize;
            step1_detections[k] += o.step1_selected.contains(tp) as usize;
        }
        noise_total += o.noise.len();
        step1_noise_total += o.step1_selected.iter().filter(|p| !true_patterns.contains(p)).count();
    }
    Ok(FrequencyTable {
        setting: spec.label(),
        reps,
        var_names: outcomes[0].2.clone(),
        true_patterns,
        detections,
        noise_total,
        step1_detections,
        step1_noise_total,
        outcomes: outcomes.into_iter().map(|(o, _, _)| o).collect(),
    })
}

/// Count of each selected pattern across replicates (noise included).
pub fn pattern_histogram(table: &FrequencyTable) -> BTreeMap<Pattern, usize> {
    let mut h = BTreeMap::new();
    for o in &table.outcomes {
        for p in &o.selected {
            *h.entry(p.clone()).or_insert(0) += 1;
        }
    }
    h
}
