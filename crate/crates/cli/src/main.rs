//! `mg-spectra`: batch front end for the magneto-geostrophic experiments.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

mod config;
mod experiments;
mod plot;
mod report;

use experiments::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    SigmaTable,
    OracleXcheck,
    SliceGrowth,
    IllposedScaling,
    DiffusiveSweep,
    DynamoScaling,
    GevreyBreakdown,
    LipschitzBlowup,
    NonlinearEnergy,
    /// Dump the velocity symbol over a box (debug).
    Symbols,
    /// Melt the outputs found in `--out` into `plot_data.csv`.
    PlotData,
}

impl Target {
    fn experiment(self) -> Option<Experiment> {
        Some(match self {
            Target::SigmaTable => Experiment::SigmaTable,
            Target::OracleXcheck => Experiment::OracleXcheck,
            Target::SliceGrowth => Experiment::SliceGrowth,
            Target::IllposedScaling => Experiment::IllposedScaling,
            Target::DiffusiveSweep => Experiment::DiffusiveSweep,
            Target::DynamoScaling => Experiment::DynamoScaling,
            Target::GevreyBreakdown => Experiment::GevreyBreakdown,
            Target::LipschitzBlowup => Experiment::LipschitzBlowup,
            Target::NonlinearEnergy => Experiment::NonlinearEnergy,
            Target::Symbols => Experiment::Symbols,
            Target::PlotData => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "mg-spectra", version, about = "Spectral experiments for the magneto-geostrophic equation")]
struct Cli {
    #[arg(value_enum)]
    experiment: Target,
    /// JSON config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`); for plot-data, the results directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "MG_SPECTRA_THREADS")]
    threads: Option<usize>,
    /// Check the config and exit.
    #[arg(long)]
    validate_only: bool,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.experiment.experiment() {
        Some(exp) => run(exp, cli),
        None => plot_data(cli.out.as_deref().unwrap_or(std::path::Path::new("."))),
    }
}

fn plot_data(dir: &std::path::Path) -> ExitCode {
    match plot::emit_plot_data(dir) {
        Ok(csv) => {
            let path = dir.join("plot_data.csv");
            if let Err(e) = std::fs::write(&path, csv) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(exp: Experiment, args: Cli) -> ExitCode {
    let name = exp.name();
    let raw = match &args.config {
        Some(p) => config::load(p),
        None => Ok(config::RawConfig::default()),
    };
    let prepared = raw.and_then(|raw| {
        experiments::prepare(exp, &raw).map(|p| (p, raw.output_dir))
    });
    let (prepared, cfg_out) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{name}: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("{name}: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    if args.validate_only {
        println!("{name}: config is valid");
        return ExitCode::SUCCESS;
    }
    let out = args
        .out
        .or(cfg_out)
        .unwrap_or_else(|| PathBuf::from("results").join(&name));
    let start = Instant::now();
    let (report, params, tolerances) = match prepared.run() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{name}: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = report.write(&out, &params, &tolerances, wall) {
        eprintln!("{name}: {e:#}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{name}: results in {} ({wall:.2} s)", out.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
