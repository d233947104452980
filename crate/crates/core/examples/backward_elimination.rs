//! Step 2 on its own: starts from the patterns kept by the penalized fit and
//! removes them one at a time, refitting an unpenalized logistic model at each
//! stage, then keeps the stage with the smallest BGACV.
//!
//! Run with `cargo run --release --example backward_elimination -- [seed]`.

use lps::glm::backward_eliminate;
use lps::pipeline::{pattern_design, solve_lps_path, LpsConfig};
use lps::simgen::gen_example1;
use lps::tuning::select_lambda;

fn main() -> lps::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (data, _) = gen_example1(800, seed)?;
    let names = data.var_names().to_vec();
    let cfg = LpsConfig::default();
    let design = pattern_design(&data, 7, cfg.column_budget)?;
    let y = data.y_f64();

    let (_, fits) = solve_lps_path(&design, &y, &cfg)?;
    let chosen = &fits[select_lambda(&fits, &design, &y, cfg.criterion)?.index];
    println!("step 1 kept {} patterns at lambda = {:.4e}", chosen.support_size(), chosen.lambda);

    let el = backward_eliminate(&design, &chosen.support(), &y)?;
    for stage in &el.stages {
        let removed = stage.removed.map_or("-".to_string(), |j| design.pattern(j).label(&names));
        let best = if stage.stage == el.best_stage { "  <- best" } else { "" };
        println!("stage {:>2}: removed {:<12} bgacv {:.6}{best}", stage.stage, removed, stage.bgacv);
    }
    println!("{} logistic fits", el.fits_performed);
    for (k, &j) in el.final_columns().iter().enumerate() {
        println!(
            "  {:<12} {:>8.4} (se {:.4}, p = {:.2e})",
            design.pattern(j).label(&names),
            el.final_fit.beta[k + 1],
            el.final_fit.std_errors[k + 1],
            el.final_fit.p_values[k + 1]
        );
    }
    Ok(())
}
