//! Solves the penalized problem along a decreasing lambda grid with warm
//! starts and prints per-fit diagnostics: support size, iterations, final
//! optimality measure and the tuning scores.
//!
//! Run with `cargo run --release --example solver_path -- [example] [seed]`
//! where `example` is `ex1` (default) or `ex3`.
//!
//! The `ex3` grid stops at `0.02 * lambda_max`. Further down, thousands of
//! patterns become nonzero; once more than `newton_max_inactive` (500)
//! columns are inactive only first-order steps are taken, and fits end at
//! `max_iters` flagged as unconverged.

use std::time::Instant;

use lps::patterns::{build_design, enumerate_patterns};
use lps::simgen::{gen_example1, gen_example3};
use lps::solver::{lambda_grid, solve_path, SolverConfig};
use lps::tuning::{select_lambda, Criterion};

fn main() -> lps::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "ex1".into());
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, q, min_ratio) = match which.as_str() {
        "ex3" => (gen_example3(2000, 0.2, 0.2, seed)?.0, 4, 2e-2),
        _ => (gen_example1(800, seed)?.0, 7, 1e-4),
    };
    let patterns = enumerate_patterns(data.p(), q)?;
    let design = build_design(&data, &patterns)?;
    let y = data.y_f64();
    let lambdas = lambda_grid(&design, &y, 50, min_ratio)?;

    let t = Instant::now();
    let path = solve_path(&design, &y, &lambdas, &SolverConfig::default())?;
    println!("{} columns, path solved in {:.2}s", design.n_columns(), t.elapsed().as_secs_f64());

    let sel = select_lambda(&path, &design, &y, Criterion::Bgacv)?;
    println!("{:>12} {:>8} {:>6} {:>10} {:>10}  conv", "lambda", "support", "iters", "delta", "bgacv");
    for (k, fit) in path.iter().enumerate() {
        let score = sel
            .record_index
            .iter()
            .position(|&i| i == k)
            .map_or(f64::NAN, |r| sel.records[r].bgacv);
        println!(
            "{:>12.4e} {:>8} {:>6} {:>10.2e} {:>10.6}  {}{}",
            fit.lambda,
            fit.support_size(),
            fit.iterations,
            fit.delta_final,
            score,
            fit.converged,
            if k == sel.index { "  <- selected" } else { "" }
        );
    }
    Ok(())
}
