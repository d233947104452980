//! Scores one lambda path with both tuning criteria and prints where each
//! one puts its minimum. BGACV weights the optimism term by `log(n) / 2` and
//! usually stops earlier on the path, with fewer patterns.
//!
//! Run with `cargo run --release --example gacv_vs_bgacv -- [seed]`.

use lps::pipeline::pattern_design;
use lps::simgen::gen_example1;
use lps::solver::{lambda_grid, solve_path, SolverConfig};
use lps::tuning::{select_lambda, Criterion};

fn main() -> lps::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, _) = gen_example1(800, seed)?;
    let design = pattern_design(&data, 7, 2_000_000)?;
    let y = data.y_f64();
    let lambdas = lambda_grid(&design, &y, 50, 1e-4)?;
    let fits = solve_path(&design, &y, &lambdas, &SolverConfig::default())?;

    let gacv = select_lambda(&fits, &design, &y, Criterion::Gacv)?;
    let bgacv = select_lambda(&fits, &design, &y, Criterion::Bgacv)?;
    println!("{:>12} {:>6} {:>10} {:>10} {:>10}", "lambda", "N_B0", "obs", "gacv", "bgacv");
    for r in &gacv.records {
        let mark = match (r.lambda == fits[gacv.index].lambda, r.lambda == fits[bgacv.index].lambda) {
            (true, true) => " <- both",
            (true, false) => " <- gacv",
            (false, true) => " <- bgacv",
            _ => "",
        };
        println!("{:>12.4e} {:>6} {:>10.6} {:>10.6} {:>10.6}{mark}", r.lambda, r.support_size, r.obs, r.gacv, r.bgacv);
    }
    let names = data.var_names();
    for (label, sel) in [("gacv", &gacv), ("bgacv", &bgacv)] {
        let fit = &fits[sel.index];
        let patterns: Vec<String> = fit.support().iter().map(|&j| design.pattern(j).label(names)).collect();
        println!("{label}: {} patterns: {}", patterns.len(), patterns.join(" "));
    }
    Ok(())
}
