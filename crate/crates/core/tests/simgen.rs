use std::f64::consts::PI;

use lps::patterns::{BinaryDataset, PatternModel};
use lps::simgen::{
    exact_incidence, gaw_column, gaw_third_order_pattern, gaw_true_model, gen_example1, gen_example2,
    gen_example3, gen_gaw_style, gen_myopia_shaped, GawConfig, SimSpec, GAW_SMOKING, MYOPIA_MARGINALS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn logistic(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

fn mean(v: &[u8]) -> f64 {
    v.iter().map(|&b| b as f64).sum::<f64>() / v.len() as f64
}

fn correlation(a: &[u8], b: &[u8]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64;
    let cov = a.iter().zip(b).map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb)).sum::<f64>() / n;
    cov / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt()
}

/// Pearson chi-square of `y` against the true probabilities, pooled over the
/// distinct logit values of the generating model.
fn stratified_fit_p_value(data: &BinaryDataset, truth: &PatternModel) -> f64 {
    let mut strata: Vec<(f64, f64, f64)> = Vec::new(); // (logit, count, ones)
    for (row, &y) in data.rows().zip(data.y()) {
        let f = truth.evaluate(row).unwrap();
        match strata.iter_mut().find(|s| s.0 == f) {
            Some(s) => {
                s.1 += 1.0;
                s.2 += y as f64;
            }
            None => strata.push((f, 1.0, y as f64)),
        }
    }
    let stat: f64 = strata
        .iter()
        .map(|&(f, n, ones)| {
            let p = logistic(f);
            (ones - n * p).powi(2) / (n * p * (1.0 - p))
        })
        .sum();
    1.0 - ChiSquared::new(strata.len() as f64).unwrap().cdf(stat)
}

#[test]
fn example1_marginals_and_tetrachoric_correlation() {
    let (small, _) = gen_example1(800, 11).unwrap();
    let se = (0.25f64 / 800.0).sqrt();
    for j in 0..7 {
        assert!((mean(&small.column(j)) - 0.5).abs() < 3.0 * se, "x{}", j + 1);
    }
    let (data, _) = gen_example1(100_000, 12).unwrap();
    let target = 2.0 * 0.7f64.asin() / PI;
    assert!((target - 0.4936).abs() < 1e-4);
    let se = (1.0 - target * target) / (100_000f64).sqrt();
    for k in 0..3 {
        let r = correlation(&data.column(k), &data.column(k + 3));
        assert!((r - target).abs() < 4.0 * se, "pair {k}: {r}");
    }
    // X7 independent of the rest
    assert!(correlation(&data.column(6), &data.column(0)).abs() < 4.0 / (100_000f64).sqrt());
}

#[test]
fn example1_incidence_matches_exact_value() {
    // each thresholded pair has P(1,1) = P(0,0) = 1/4 + asin(0.7) / (2 pi)
    let p11 = 0.25 + 0.7f64.asin() / (2.0 * PI);
    let p10 = 0.5 - p11;
    let joint = |a: u32, b: u32| if a == b { p11 } else { p10 };
    let mut exact = 0.0;
    for m in 0u32..64 {
        let x: Vec<u32> = (0..6).map(|j| (m >> j) & 1).collect();
        let w = joint(x[0], x[3]) * joint(x[1], x[4]) * joint(x[2], x[5]);
        let f = -2.0 + 1.5 * x[0] as f64 + 1.5 * (x[1] * x[2]) as f64 + 2.0 * (x[3] * x[4] * x[5]) as f64;
        exact += w * logistic(f);
    }
    let (data, truth) = gen_example1(100_000, 13).unwrap();
    let se = (exact * (1.0 - exact) / 100_000.0).sqrt();
    assert!((data.incidence() - exact).abs() < 4.0 * se, "{} vs {exact}", data.incidence());
    assert!(stratified_fit_p_value(&data, &truth) > 0.001);
}

#[test]
fn example2_marginals_and_copies() {
    let (data, truth) = gen_example2(100_000, 0.0, 21).unwrap();
    let target = 0.841_344_746f64;
    let se = (target * (1.0 - target) / 100_000.0).sqrt();
    for j in 0..8 {
        let tol = if j < 4 { 4.0 * se } else { 4.0 * se + 1e-3 };
        let want = if j < 4 { target } else { 0.84 };
        assert!((mean(&data.column(j)) - want).abs() < tol, "x{}", j + 1);
    }
    assert!(correlation(&data.column(0), &data.column(4)).abs() < 4.0 / (100_000f64).sqrt());
    assert!(stratified_fit_p_value(&data, &truth) > 0.001);

    let (copy, _) = gen_example2(500, 1.0, 22).unwrap();
    for j in 0..4 {
        assert_eq!(copy.column(j), copy.column(j + 4));
    }
}

#[test]
fn example3_incidence_matches_monte_carlo() {
    let (rho1, rho2) = (0.2f64, 0.2f64);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1_000_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let common: f64 = rng.sample(StandardNormal);
        let x: Vec<u8> = (0..4)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                (1.0 + rho1.sqrt() * common + (1.0 - rho1).sqrt() * e > 0.0) as u8
            })
            .collect();
        let copy = |rng: &mut ChaCha8Rng, v: u8| if rng.gen::<f64>() < rho2 { v } else { (rng.gen::<f64>() < 0.84) as u8 };
        let x6 = copy(&mut rng, x[1]);
        let x7 = copy(&mut rng, x[2]);
        let x9 = rng.gen::<bool>() as u8;
        let f = -2.0 + 2.0 * x9 as f64 + 2.0 * (x6 * x7) as f64 + 2.0 * (x[0] * x[1] * x[2] * x[3]) as f64;
        total += logistic(f);
    }
    let oracle = total / draws as f64;
    let (data, truth) = gen_example3(100_000, rho1, rho2, 31).unwrap();
    assert_eq!(data.p(), 20);
    let se = (oracle * (1.0 - oracle) / 100_000.0).sqrt() + (0.25 / draws as f64).sqrt();
    assert!((data.incidence() - oracle).abs() < 4.0 * se, "{} vs {oracle}", data.incidence());
    assert!(stratified_fit_p_value(&data, &truth) > 0.001);

    let (indep, _) = gen_example3(100_000, 0.0, 0.0, 32).unwrap();
    let bound = 4.0 / (100_000f64).sqrt();
    for (a, b) in [(0, 1), (0, 4), (1, 5), (2, 8), (3, 19)] {
        assert!(correlation(&indep.column(a), &indep.column(b)).abs() < bound, "x{} x{}", a + 1, b + 1);
    }
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(gen_example1(300, 5).unwrap().0, gen_example1(300, 5).unwrap().0);
    assert_eq!(gen_example2(300, 0.5, 5).unwrap().0, gen_example2(300, 0.5, 5).unwrap().0);
    assert_eq!(gen_example3(300, 0.2, 0.2, 5).unwrap().0, gen_example3(300, 0.2, 0.2, 5).unwrap().0);
    let spec = SimSpec::gaw(5);
    assert_eq!(spec.generate(3).unwrap().0, spec.generate(3).unwrap().0);
    assert_ne!(spec.generate(3).unwrap().0, spec.generate(4).unwrap().0);
}

#[test]
fn gaw_model_values() {
    let cfg = GawConfig::default();
    let p = 3 + 2 * cfg.n_snps;
    assert_eq!(p, 1351);
    let truth = gaw_true_model(p).unwrap();
    let mut x = vec![0u8; p];
    assert!((truth.evaluate(&x).unwrap() + 4.8546).abs() < 1e-12);
    x[GAW_SMOKING] = 1;
    assert!((truth.evaluate(&x).unwrap() - (-4.8546 + 0.8603)).abs() < 1e-12);
    assert_eq!(truth.coefficient(&gaw_third_order_pattern()), Some(3.0));
    assert_eq!(gaw_column(1, 1), 3);

    let (data, truth) = gen_gaw_style(20_000, 8, &cfg).unwrap();
    assert!((0.40..0.50).contains(&data.incidence()), "{}", data.incidence());
    assert!(stratified_fit_p_value(&data, &truth) > 0.001);
}

#[test]
fn myopia_shaped_generator_is_calibrated() {
    let (data, truth) = gen_myopia_shaped(876, 0.137, 4).unwrap();
    assert_eq!((data.n(), data.p()), (876, 7));
    assert!((exact_incidence(&truth, &MYOPIA_MARGINALS) - 0.137).abs() < 1e-9);
    let (big, _) = gen_myopia_shaped(100_000, 0.137, 5).unwrap();
    let se = (0.137f64 * 0.863 / 100_000.0).sqrt();
    assert!((big.incidence() - 0.137).abs() < 4.0 * se);
    for (j, &m) in MYOPIA_MARGINALS.iter().enumerate() {
        assert!((mean(&big.column(j)) - m).abs() < 4.0 * (m * (1.0 - m) / 100_000.0).sqrt());
    }
}
