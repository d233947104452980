use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lps::ingest::{ingest, read_canonical, write_canonical, CutpointConfig};
use lps::patterns::{build_design, enumerate_patterns, BinaryDataset, PatternModel};
use lps::pipeline::{fit_path, run_lps, scramble_study, tune_path, LpsConfig, LpsReport, SavedPath, Screening};
use lps::simgen::{replicate, SimSpec};
use lps::tuning::{write_score_csv, Criterion};
use lps::{LpsError, Result};

#[derive(Parser)]
#[command(name = "lps", version, about = "Search for sparse Boolean patterns in binary risk-factor data")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the pattern columns generated from a dataset.
    Expand {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        q: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve the penalized path and save it as JSON.
    Fit {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        opts: RunArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a saved path and mark the selected lambda.
    Tune {
        #[command(flatten)]
        input: DataArgs,
        /// Path JSON written by `fit`.
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value = "bgacv")]
        criterion: Criterion,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full procedure and write the report, score path and elimination trace.
    Lps {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        opts: RunArgs,
        /// Output directory.
        #[arg(long, short, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Rerun the procedure on permuted responses and count false patterns.
    Scramble {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[command(flatten)]
        opts: RunArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Replicate a simulation design and tabulate pattern detections.
    Simulate {
        example: ExampleId,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Sample size (default depends on the example).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.2)]
        rho1: f64,
        #[arg(long, default_value_t = 0.2)]
        rho2: f64,
        #[command(flatten)]
        opts: RunArgs,
        /// Frequency table CSV (stdout if absent).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write replicate 0 as a binary CSV instead of running the procedure.
        #[arg(long)]
        emit_data: Option<PathBuf>,
    },
    /// Re-express a model after flipping the coding of some variables.
    Flip {
        /// Model JSON, or a report from `lps` (its final model is used).
        #[arg(long)]
        model: PathBuf,
        /// 1-based variables to flip, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV with a header row.
    data: PathBuf,
    /// Cutpoint config; without one the CSV must be binary with response column `y`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "LPS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bgacv")]
    criterion: Criterion,
    #[arg(long, default_value_t = 50)]
    n_lambda: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = ScreenArg::Auto)]
    screening: ScreenArg,
    #[arg(long, default_value_t = 0.05)]
    screen_alpha: f64,
    #[arg(long, default_value_t = 2_000_000)]
    budget: usize,
    /// Solve the whole lambda grid instead of stopping once the score stops improving.
    #[arg(long)]
    full_path: bool,
    /// Full config JSON; overrides every other option in this group.
    #[arg(long)]
    run_config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScreenArg {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Gaw,
}

impl RunArgs {
    fn config(&self) -> Result<LpsConfig> {
        if let Some(path) = &self.run_config {
            let cfg: LpsConfig = serde_json::from_reader(open(path)?)?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut cfg = LpsConfig {
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            criterion: self.criterion,
            column_budget: self.budget,
            screening: match self.screening {
                ScreenArg::Auto => Screening::Auto,
                ScreenArg::On => Screening::On,
                ScreenArg::Off => Screening::Off,
            },
            screen_alpha: self.screen_alpha,
            ..LpsConfig::default()
        };
        cfg.solver.tol = self.tol;
        cfg.solver.max_iters = self.max_iters;
        cfg.solver.seed = self.seed;
        if self.full_path {
            cfg.score_patience = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_data(input: &DataArgs) -> Result<BinaryDataset> {
    match &input.config {
        Some(cfg) => {
            let r = ingest(&input.data, &CutpointConfig::load(cfg)?)?;
            if r.rows_dropped > 0 {
                eprintln!("dropped {} of {} rows with missing values", r.rows_dropped, r.rows_read);
            }
            Ok(r.data)
        }
        None => read_canonical(open(&input.data)?),
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Expand { input, q, out } => {
            let data = load_data(&input)?;
            let design = build_design(&data, &enumerate_patterns(data.p(), q)?)?;
            let mut w = csv::Writer::from_writer(writer(out.as_deref())?);
            w.write_record(["column", "pattern", "label", "ones"])?;
            for (j, pat) in design.patterns().iter().enumerate() {
                w.write_record([
                    j.to_string(),
                    pat.to_string(),
                    pat.label(data.var_names()),
                    design.column(j).len().to_string(),
                ])?;
            }
            w.flush()?;
        }
        Command::Fit { input, q, opts, out } => {
            let data = load_data(&input)?;
            let saved = fit_path(&data, q, &opts.config()?)?;
            write_json(&saved, Some(&out))?;
        }
        Command::Tune { input, path, criterion, out } => {
            let data = load_data(&input)?;
            let saved: SavedPath = serde_json::from_reader(open(&path)?)?;
            let sel = tune_path(&data, &saved, criterion)?;
            write_score_csv(&sel.records, Some(saved.fits[sel.index].lambda), writer(out.as_deref())?)?;
        }
        Command::Lps { input, q, opts, out_dir } => {
            let data = load_data(&input)?;
            let report = run_lps(&data, q, &opts.config()?)?;
            std::fs::create_dir_all(&out_dir)?;
            write_json(&report, Some(&out_dir.join("report.json")))?;
            report.write_score_path_csv(File::create(out_dir.join("score_path.csv"))?)?;
            report.write_elimination_csv(File::create(out_dir.join("elimination.csv"))?)?;
            println!("{}", report.final_model.describe(&report.var_names));
        }
        Command::Scramble { input, q, reps, opts, out } => {
            let data = load_data(&input)?;
            let cfg = opts.config()?;
            let table = scramble_study(&data, q, &cfg, reps, opts.seed)?;
            table.write_csv(writer(out.as_deref())?)?;
            eprintln!("{} patterns found over {} scrambles", table.total(), reps);
        }
        Command::Simulate { example, reps, n, rho, rho1, rho2, opts, out, emit_data } => {
            let seed = opts.seed;
            let mut spec = match example {
                ExampleId::Ex1 => SimSpec::ex1(seed),
                ExampleId::Ex2 => SimSpec::ex2(rho, seed),
                ExampleId::Ex3 => SimSpec::ex3(rho1, rho2, seed),
                ExampleId::Gaw => SimSpec::gaw(seed),
            };
            if let Some(n) = n {
                spec.n = n;
            }
            if let Some(path) = emit_data {
                let (data, _) = spec.generate(0)?;
                write_canonical(&data, BufWriter::new(File::create(path)?))?;
                return Ok(());
            }
            let table = replicate(&spec, reps, &opts.config()?)?;
            table.write_csv(writer(out.as_deref())?)?;
        }
        Command::Flip { model, vars, out } => {
            let text = std::io::read_to_string(open(&model)?)?;
            let m: PatternModel = match serde_json::from_str(&text) {
                Ok(m) => m,
                Err(_) => serde_json::from_str::<LpsReport>(&text)?.final_model,
            };
            if vars.contains(&0) {
                return Err(LpsError::InvalidArgument("variables are numbered from 1".into()));
            }
            let flipped: Vec<usize> = vars.iter().map(|v| v - 1).collect();
            write_json(&m.flip_coding(&flipped)?, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
