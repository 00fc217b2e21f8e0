//! `modelfree`: arbitrage checks, price bounds and hedges on finite path grids.

mod commands;
mod config;
mod payoff_spec;
mod selftest;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{Format, RunConfig, ToleranceOverrides};

const EXIT_CODES: &str = "\
Exit codes:
  0  success (feasible market, bounds computed, checks passed)
  1  invalid input or usage
  2  numerical failure in the LP solver
  3  arbitrage found, or no admissible martingale measure
  4  a self check or pathwise verification failed";

#[derive(Debug, Parser)]
#[command(name = "modelfree", version, about, after_help = EXIT_CODES)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Instance JSON with the grid, quotes and optional marginals.
    #[arg(long, global = true, value_name = "FILE")]
    instance: Option<PathBuf>,

    /// Output format [default: text].
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Primal feasibility tolerance [default: 1e-9].
    #[arg(long, global = true, value_name = "TOL")]
    tol_feas: Option<f64>,

    /// Duality gap tolerance [default: 1e-7].
    #[arg(long, global = true, value_name = "TOL")]
    tol_gap: Option<f64>,

    /// Largest number of paths to enumerate [default: 10000000].
    #[arg(long, global = true, value_name = "N")]
    max_paths: Option<u64>,

    /// Seed for randomized checks [default: 20130517].
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide between a martingale measure and an explicit arbitrage.
    CheckArbitrage,
    /// Upper and lower model-free prices of a claim with hedges.
    Price {
        /// Claim, e.g. call:1, put:1.5,2, entropy, max, spread:0,2 or JSON.
        #[arg(long)]
        payoff: String,
        /// Fix the marginal at DATE from a call strip CSV with columns strike,price.
        #[arg(long, value_name = "DATE=FILE")]
        calls: Vec<String>,
    },
    /// Exhaustive check of the pathwise running maximum hedge.
    DoobDemo {
        /// Comma separated grid levels containing 1 [default: built-in grids].
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Number of trading dates [default: built-in grids].
        #[arg(long)]
        horizon: Option<usize>,
        /// Entropy prices C to tabulate.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1", allow_negative_numbers = true)]
        c: Vec<f64>,
    },
    /// Convert between a call price strip and a marginal law.
    BlConvert {
        /// CSV strip to convert into masses.
        #[arg(long, value_name = "FILE", conflicts_with = "marginal")]
        calls: Option<PathBuf>,
        /// Marginal JSON {date, levels, masses} to convert into call prices.
        #[arg(long, value_name = "FILE")]
        marginal: Option<PathBuf>,
        /// Date recorded on the strip.
        #[arg(long, default_value_t = 1)]
        date: usize,
        /// Support levels for masses, or strikes for prices [default: the strikes or levels given].
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Quick randomized run of the engine's invariants.
    Selftest {
        /// Random instances per check.
        #[arg(long, default_value_t = 40)]
        instances: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckArbitrage => "check-arbitrage",
            Command::Price { .. } => "price",
            Command::DoobDemo { .. } => "doob-demo",
            Command::BlConvert { .. } => "bl-convert",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn run(cli: Cli) -> Result<commands::Output, Failure> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Input)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        command: None,
        instance: cli.instance.clone(),
        format: cli.format,
        tolerances: ToleranceOverrides {
            feas: cli.tol_feas,
            gap: cli.tol_gap,
            comp: None,
            max_iterations: None,
        },
        max_paths: cli.max_paths,
        seed: cli.seed,
    };
    let settings = file.settings(cli.command.name(), &flags).map_err(Failure::Input)?;
    match &cli.command {
        Command::CheckArbitrage => commands::check_arbitrage(&settings),
        Command::Price { payoff, calls } => commands::price(&settings, payoff, calls),
        Command::DoobDemo { levels, horizon, c } => commands::doob_demo(&settings, levels.clone(), *horizon, c),
        Command::BlConvert {
            calls,
            marginal,
            date,
            levels,
        } => commands::bl_convert(&settings, calls.as_deref(), marginal.as_deref(), *date, levels.clone()),
        Command::Selftest { instances } => commands::selftest(&settings, *instances),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.body.as_bytes());
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("modelfree: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
