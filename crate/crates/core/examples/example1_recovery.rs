//! Fits the two-step procedure to one draw of the first simulation design and
//! compares the selected patterns with the generating model.
//!
//! Run with `cargo run --release --example example1_recovery -- [seed]`.

use lps::pipeline::{run_lps, LpsConfig};
use lps::simgen::gen_example1;

fn main() -> lps::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, truth) = gen_example1(800, seed)?;
    let names = data.var_names().to_vec();
    println!("n = {}, incidence = {:.3}", data.n(), data.incidence());
    println!("true model:   {}", truth.describe(&names));

    let report = run_lps(&data, 7, &LpsConfig::default())?;
    println!(
        "step 1: lambda = {:.4e} ({} patterns, {} on the path)",
        report.step1.lambda,
        report.step1.terms.len(),
        report.step1.path_length
    );
    println!("step 1 model: {}", report.step1_model.describe(&names));
    println!("final model:  {}", report.final_model.describe(&names));
    for t in &report.step2.terms {
        println!("  {:<12} {:>8.4}  p = {:.2e}", t.label, t.coef, t.p_value.unwrap_or(f64::NAN));
    }
    println!(
        "timing: step 1 {:.2}s, step 2 {:.2}s",
        report.timing.step1_secs, report.timing.step2_secs
    );
    Ok(())
}
