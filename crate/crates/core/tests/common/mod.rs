//! Independent reference computations for the integration tests. Nothing here
//! calls into the scoring code of the library; only the leave-one-out curve
//! uses the library solver for its refits.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lps::patterns::DesignMatrix;
use lps::solver::{solve_path, SolverConfig};

/// Dense `n x m` 0/1 design with the constant in column 0.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl DenseProblem {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// Sparse copy for the library (column 0 is added by the library).
    pub fn design(&self) -> DesignMatrix {
        let cols = (1..self.m())
            .map(|j| (0..self.n()).filter(|&i| self.x[(i, j)] == 1.0).map(|i| i as u32).collect())
            .collect();
        DesignMatrix::from_indicator_columns(self.n(), cols).unwrap()
    }

    pub fn logits(&self, z: &[f64]) -> DVector<f64> {
        &self.x * DVector::from_column_slice(z)
    }

    pub fn loss(&self, z: &[f64]) -> f64 {
        let f = self.logits(z);
        f.iter()
            .zip(&self.y)
            .map(|(&fi, &yi)| softplus(fi) - yi * fi)
            .sum::<f64>()
            / self.n() as f64
    }

    pub fn objective(&self, z: &[f64], lambda: f64) -> f64 {
        self.loss(z) + lambda * z[1..].iter().map(|c| c.abs()).sum::<f64>()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let f = self.logits(z);
        let r = DVector::from_iterator(self.n(), f.iter().zip(&self.y).map(|(&fi, &yi)| logistic(fi) - yi));
        (self.x.transpose() * r / self.n() as f64).iter().copied().collect()
    }
}

pub fn softplus(f: f64) -> f64 {
    if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    }
}

pub fn logistic(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

/// Random sparse-ish logistic instance: `m - 1` binary columns of random
/// density, a few active coefficients.
pub fn random_problem(seed: u64, n: usize, m: usize) -> DenseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, m);
    let density: Vec<f64> = (0..m).map(|_| rng.gen_range(0.15..0.7)).collect();
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..m {
            x[(i, j)] = (rng.gen::<f64>() < density[j]) as u8 as f64;
        }
    }
    let mut beta = vec![0.0; m];
    beta[0] = rng.gen_range(-1.5..0.5);
    for _ in 0..3.min(m - 1) {
        let j = rng.gen_range(1..m);
        beta[j] = rng.gen_range(-2.0..2.0);
    }
    let f = &x * DVector::from_vec(beta);
    let y = f.iter().map(|&fi| (rng.gen::<f64>() < logistic(fi)) as u8 as f64).collect();
    DenseProblem { x, y }
}

/// `max |grad_j|` over penalized columns at the intercept-only optimum.
pub fn dense_lambda_max(p: &DenseProblem) -> f64 {
    let ybar = p.y.iter().sum::<f64>() / p.n() as f64;
    let ybar = ybar.clamp(0.5 / p.n() as f64, 1.0 - 0.5 / p.n() as f64);
    let mut z = vec![0.0; p.m()];
    z[0] = (ybar / (1.0 - ybar)).ln();
    p.gradient(&z)[1..].iter().fold(0.0, |a, g| a.max(g.abs()))
}

fn prox(v: &[f64], t: f64) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(j, &x)| if j == 0 { x } else { x.signum() * (x.abs() - t).max(0.0) })
        .collect()
}

/// Accelerated proximal gradient (FISTA with backtracking and adaptive
/// restart), stopped when the gradient-mapping norm falls below `tol`.
pub fn fista(p: &DenseProblem, lambda: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let m = p.m();
    let mut z = vec![0.0; m];
    let mut w = z.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    for _ in 0..max_iter {
        let g = p.gradient(&w);
        let fw = p.loss(&w);
        let z_new = loop {
            let step = 1.0 / lip;
            let cand = prox(&w.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>(), lambda * step);
            let d: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
            let quad = fw + d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * lip * d.iter().map(|a| a * a).sum::<f64>();
            if p.loss(&cand) <= quad + 1e-15 {
                break cand;
            }
            lip *= 2.0;
        };
        let mapping = z_new.iter().zip(&w).map(|(a, b)| (a - b) * lip).map(|v| v * v).sum::<f64>().sqrt();
        if mapping < tol {
            z = z_new;
            break;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let (t_z, t_new_obj) = (p.objective(&z, lambda), p.objective(&z_new, lambda));
        // restart only on an increase that rounding cannot explain
        if t_new_obj > t_z + 1e-14 * t_z.abs() {
            t = 1.0;
            w = z.clone();
            continue;
        }
        w = z_new.iter().zip(&z).map(|(a, b)| a + (t - 1.0) / t_new * (a - b)).collect();
        z = z_new;
        t = t_new;
        lip *= 0.9;
    }
    let obj = p.objective(&z, lambda);
    (z, obj)
}

/// `min_v ||grad + lambda v||` over subgradients `v` of the penalty.
pub fn min_norm_subgradient(z: &[f64], grad: &[f64], lambda: f64) -> f64 {
    z.iter()
        .zip(grad)
        .enumerate()
        .map(|(j, (&zj, &g))| {
            let r = if j == 0 {
                g
            } else if zj > 0.0 {
                g + lambda
            } else if zj < 0.0 {
                g - lambda
            } else {
                (g.abs() - lambda).max(0.0)
            };
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// `tr(H)` and `tr(WH)` for `H = B (B'WB)^{-1} B'` by explicit `n x n` products.
pub fn dense_h_traces(b: &DMatrix<f64>, w: &[f64]) -> (f64, f64) {
    let wd = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let u = b.transpose() * &wd * b;
    let h = b * u.try_inverse().expect("invertible") * b.transpose();
    (h.trace(), (&wd * &h).trace())
}

/// GACV/BGACV from dense algebra, basis = constant + `support` columns.
pub fn dense_scores(p: &DenseProblem, z: &[f64], support: &[usize]) -> (f64, f64) {
    let n = p.n() as f64;
    let f = p.logits(z);
    let prob: Vec<f64> = f.iter().map(|&v| logistic(v)).collect();
    let w: Vec<f64> = prob.iter().map(|q| q * (1.0 - q)).collect();
    let mut cols = vec![0];
    cols.extend_from_slice(support);
    let b = DMatrix::from_fn(p.n(), cols.len(), |i, k| p.x[(i, cols[k])]);
    let (tr_h, _) = dense_h_traces(&b, &w);
    let obs = p.loss(z);
    let num: f64 = p.y.iter().zip(&prob).map(|(y, q)| y * (y - q)).sum();
    let denom = if support.is_empty() { n - 1.0 } else { n - support.len() as f64 };
    let gamma = tr_h * num / denom;
    (obs + gamma / n, obs + 0.5 * n.ln() * gamma / n)
}

impl DenseProblem {
    pub fn without_row(&self, i: usize) -> DenseProblem {
        let keep: Vec<usize> = (0..self.n()).filter(|&r| r != i).collect();
        DenseProblem {
            x: self.x.select_rows(&keep),
            y: keep.iter().map(|&r| self.y[r]).collect(),
        }
    }
}

/// Exact leave-one-out CV over a lambda grid:
/// `(1/n) sum_i [-y_i f^{[-i]}(x_i) + log(1 + exp(f(x_i)))]`, where the log
/// term uses the full-data fit. Each held-out refit minimizes the full-data
/// objective without row `i`; on `n - 1` rows that is the same problem with
/// the penalty scaled by `n / (n - 1)`.
pub fn exact_loo_curve(p: &DenseProblem, lambdas: &[f64]) -> Vec<f64> {
    let n = p.n();
    let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
    let full = solve_path(&p.design(), &p.y, lambdas, &cfg).unwrap();
    let scaled: Vec<f64> = lambdas.iter().map(|l| l * n as f64 / (n - 1) as f64).collect();
    let mut cv = vec![0.0; lambdas.len()];
    for i in 0..n {
        let sub = p.without_row(i);
        let fits = solve_path(&sub.design(), &sub.y, &scaled, &cfg).unwrap();
        for (k, fit) in fits.iter().enumerate() {
            let zi = fit.dense();
            let fi: f64 = (0..p.m()).map(|j| p.x[(i, j)] * zi[j]).sum();
            let f_full: f64 = p.logits(&full[k].dense())[i];
            cv[k] += (-p.y[i] * fi + softplus(f_full)) / n as f64;
        }
    }
    cv
}

/// Balanced small instance: six fair binary columns, two effects of size
/// 1.5, intercept near zero.
pub fn loo_problem(seed: u64, n: usize) -> DenseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 7;
    let x = DMatrix::from_fn(n, m, |_, j| if j == 0 { 1.0 } else { (rng.gen::<f64>() < 0.5) as u8 as f64 });
    let mut beta = vec![0.0; m];
    beta[0] = rng.gen_range(-0.5..0.5) - 0.75;
    let a = rng.gen_range(1..m);
    let b = (a + rng.gen_range(1..m - 1) - 1) % (m - 1) + 1;
    beta[a] = 1.5;
    beta[b] = if rng.gen::<bool>() { 1.5 } else { -1.5 };
    let f = &x * DVector::from_vec(beta);
    let y = f.iter().map(|&fi| (rng.gen::<f64>() < logistic(fi)) as u8 as f64).collect();
    DenseProblem { x, y }
}

/// Index of the smallest value; ties go to the earliest index.
pub fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Log-spaced grid from `hi` down to `hi * ratio`.
pub fn log_grid(hi: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| hi * ratio.powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Every `x ∈ {0,1}^p`.
pub fn all_inputs(p: usize) -> Vec<Vec<u8>> {
    (0..1u32 << p).map(|m| (0..p).map(|j| ((m >> j) & 1) as u8).collect()).collect()
}

/// `x` with the variables in `flipped` recoded as `1 - x_j`.
pub fn flip_input(x: &[u8], flipped: &[usize]) -> Vec<u8> {
    x.iter().enumerate().map(|(j, &v)| if flipped.contains(&j) { 1 - v } else { v }).collect()
}
