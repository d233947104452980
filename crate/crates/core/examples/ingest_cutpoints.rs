//! Dichotomizes a raw table with a cutpoint file and prints the coded rows.
//!
//! Each rule marks the side of its variable believed to carry the risk as 1.
//! The default inputs are the bundled five-row sample and
//! `examples/data/myopia_cuts.json`.
//!
//! Run with `cargo run --example ingest_cutpoints -- [data.csv] [cuts.json]`.

use std::path::PathBuf;

use lps::ingest::{ingest, write_canonical, CutpointConfig};

fn main() -> lps::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1);
    let csv = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("tests/fixtures/myopia_raw.csv"));
    let cuts = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("examples/data/myopia_cuts.json"));

    let cfg = CutpointConfig::load(&cuts)?;
    let got = ingest(&csv, &cfg)?;
    let data = got.data;
    println!("{} rows read, {} dropped for missing values", got.rows_read, got.rows_dropped);
    for (name, note) in data.var_names().iter().zip(data.coding_notes()) {
        println!("  {name:<8} 1 = {note}");
    }
    println!();
    write_canonical(&data, std::io::stdout().lock())?;
    Ok(())
}
