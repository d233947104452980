//! Estimates how often the procedure reports patterns when there is nothing
//! to find: the response of a myopia-shaped synthetic sample is permuted and
//! the whole procedure rerun on each permutation.
//!
//! Run with `cargo run --release --example scramble_study -- [reps] [seed]`.

use lps::pipeline::{scramble_study, LpsConfig};
use lps::simgen::gen_myopia_shaped;

fn main() -> lps::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let (data, truth) = gen_myopia_shaped(876, 0.137, seed)?;
    println!("n = {}, incidence = {:.3}", data.n(), data.incidence());
    println!("generating model: {}", truth.describe(data.var_names()));

    let table = scramble_study(&data, 7, &LpsConfig::default(), reps, seed)?;
    println!("{} patterns over {reps} scrambles", table.total());
    for (order, count) in &table.by_order {
        println!("  order {order}: {count}");
    }
    for (label, count) in &table.patterns {
        println!("  {label}: {count}");
    }
    Ok(())
}
