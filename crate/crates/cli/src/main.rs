use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plate_core::lab::{configure_threads, run, Experiment};
use plate_core::{Error, ExperimentConfig};

const CONFIG_KEYS: &str = "\
Config file: `key = value` lines, `#` starts a comment. Keys:
  experiment  classify | jump-energy | approximate | recover | liminf | minimize
  n           ambient dimension, 2 or 3 (default 2)
  omega_lo    mid-surface box lower corner, one value or one per in-plane axis (0)
  omega_hi    mid-surface box upper corner (1)
  cells       mid-surface cells per axis; a list must be power-of-two multiples (64)
  layers      thickness cells (8)
  rho         strictly decreasing list of thicknesses (0.1, 0.01)
  lambda, mu  Lame parameters (1, 1)
  crack       crack file, one simplex per line as n*n coordinates
  box_lo      lower corner of the grid box for the grid experiments (-0.25)
  box_hi      upper corner (1.25)
  h           grid spacings, power-of-two refinements of the first (0.0625)
  offsets     random grid offsets for jump-energy (200)
  datum       stretch:t | bending:k | rigid:c | cracked-stretch:t:b | file:path
  family      liminf sequence: recovery | constant | tilted
  smoothing   recovery radius: sqrt | square | fixed:r
  delta       minimizer distance threshold (0.001)
  tie_tol     tolerance of the crossover tie flag (1e-6)
  cg_tol      linear solver tolerance (1e-10)
  max_rounds  alternating minimization round cap (20)
  exhaustive  walls tried by the exhaustive fallback, 0 disables it (1)
  seed        global seed (0)
  out         output CSV path (stdout when absent)

Command-line flags override the config file. PLATE_LAB_THREADS caps the worker threads.
Exit status: 0 success, 1 invalid input, 2 solver failure.";

#[derive(Parser, Debug)]
#[command(name = "plate-lab", version, about = "Thin brittle plate experiments", after_long_help = CONFIG_KEYS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bad-cube statistics of a crack on shifted grids
    Classify(Common),
    /// Offset-averaged discrete jump energy against the anisotropic oracle
    JumpEnergy(Common),
    /// Approximant mismatch, weak-derivative error and structure checks
    Approximate(Common),
    /// Recovery-sequence sweep over rho
    Recover(Common),
    /// Lower-bound margins of a sequence family
    Liminf(Common),
    /// Minima of the plate and limit problems per rho
    Minimize(Common),
    /// Runs the experiment named by --experiment or the config file
    Sweep {
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Config file with `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid spacings, comma separated
    #[arg(long)]
    h: Option<String>,
    /// Thicknesses, comma separated and strictly decreasing
    #[arg(long)]
    rho: Option<String>,
    /// Crack file
    #[arg(long)]
    crack: Option<PathBuf>,
    /// Boundary datum or reduced state
    #[arg(long)]
    datum: Option<String>,
}

fn build_config(experiment: Option<Experiment>, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if experiment.is_some() {
        cfg.experiment = experiment;
    }
    if let Some(h) = &c.h {
        cfg.set("h", h)?;
    }
    if let Some(rho) = &c.rho {
        cfg.set("rho", rho)?;
    }
    if let Some(d) = &c.datum {
        cfg.set("datum", d)?;
    }
    if let Some(seed) = c.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(p) = &c.crack {
        cfg.crack = Some(p.clone());
    }
    if let Some(p) = &c.out {
        cfg.out = Some(p.clone());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    let (experiment, common) = match &cli.command {
        Command::Classify(c) => (Some(Experiment::Classify), c),
        Command::JumpEnergy(c) => (Some(Experiment::JumpEnergy), c),
        Command::Approximate(c) => (Some(Experiment::Approximate), c),
        Command::Recover(c) => (Some(Experiment::Recover), c),
        Command::Liminf(c) => (Some(Experiment::Liminf), c),
        Command::Minimize(c) => (Some(Experiment::Minimize), c),
        Command::Sweep { experiment, common } => (experiment.as_deref().map(str::parse).transpose()?, common),
    };
    let cfg = build_config(experiment, common)?;
    let table = run(&cfg)?;
    match &cfg.out {
        Some(path) => {
            table.write_atomic(path)?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => {
            let body = table.to_csv()?;
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
            eprintln!("{} rows", table.rows.len());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::Singular(_) | Error::RoundCap { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
