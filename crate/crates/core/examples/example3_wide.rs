//! Twenty variables expanded to all patterns of order at most four (6196
//! columns including the constant), with correlated and copied attributes.
//!
//! Run with `cargo run --release --example example3_wide -- [rho1] [rho2] [seed]`.

use lps::patterns::pattern_count;
use lps::pipeline::{run_lps, LpsConfig};
use lps::simgen::gen_example3;

fn main() -> lps::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (rho1, rho2, seed) = (arg(0, 0.2), arg(1, 0.2), arg(2, 1.0) as u64);

    let (data, truth) = gen_example3(2000, rho1, rho2, seed)?;
    let names = data.var_names().to_vec();
    println!("design columns: {}", pattern_count(20, 4) + 1);
    println!("true model:  {}", truth.describe(&names));

    let report = run_lps(&data, 4, &LpsConfig::default())?;
    println!("step 1 kept {} patterns at lambda {:.4e}", report.step1.terms.len(), report.step1.lambda);
    println!("final model: {}", report.final_model.describe(&names));
    for p in truth.patterns() {
        let hit = report.final_model.coefficient(p).is_some();
        println!("  {:<16} {}", p.label(&names), if hit { "found" } else { "missed" });
    }
    println!("step 1 took {:.1}s", report.timing.step1_secs);
    Ok(())
}
