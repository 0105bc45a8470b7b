//! `monosindex`: fit monotone single index models, run replication
//! studies and compute limiting covariances.

mod commands;
mod data;
mod error;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use monosindex::asymptotics::LinearVariant;
use monosindex::EstimatorKind;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "monosindex", version, about = "Score estimators for monotone single index models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// `psi(u) = u^3`, `X ~ N(0, I_d)`, `alpha0 = (1,...,1)/sqrt(d)`, standard normal noise.
    CubicNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    PaperFormula,
    Sandwich,
}

impl From<Variant> for LinearVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::PaperFormula => LinearVariant::PaperFormula,
            Variant::Sandwich => LinearVariant::Sandwich,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct Tuning {
    /// Spline penalty of the PLSE.
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    /// Constant `c` of the ESE bandwidth `c * range * n^(-1/7)`.
    #[arg(long, default_value_t = 0.5)]
    pub bw_const: f64,
    /// Random unit starts of the LSE search.
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Objective evaluations allowed per search.
    #[arg(long, default_value_t = 5000)]
    pub max_evals: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the index direction from a CSV file with header X1,...,Xd,Y.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        estimator: EstimatorKind,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Replicate estimators on simulated samples and summarize them.
    Simulate {
        #[arg(long, value_enum, default_value_t = Model::CubicNormal)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        reps: usize,
        /// Comma-separated subset of sse,ese,lse,mre,linear,plse.
        #[arg(long, value_delimiter = ',', default_value = "sse,ese,lse,mre,linear,plse")]
        estimators: Vec<EstimatorKind>,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long, env = "MONOSINDEX_WORKERS")]
        workers: Option<usize>,
        /// Directory receiving replications.csv, scaled_errors.csv, summary.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limiting covariance of sqrt(n) (alpha_hat - alpha0) by Monte Carlo.
    Asymptotics {
        #[arg(long, value_enum, default_value_t = Model::CubicNormal)]
        model: Model,
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// One of sse, ese, plse, linear.
        #[arg(long)]
        estimator: EstimatorKind,
        /// Formula used for the linear estimator.
        #[arg(long, value_enum, default_value_t = Variant::Sandwich)]
        variant: Variant,
        #[arg(long, default_value_t = 1_000_000)]
        mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Fit { data, estimator, tuning, seed, format } => {
            commands::fit(&data, estimator, &tuning, seed, format)
        }
        Command::Simulate { model, n, d, reps, estimators, tuning, seed, workers, out } => {
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |w| w.get()));
            let args = commands::SimulateArgs { model, n, d, reps, estimators, tuning, seed, workers, out };
            commands::simulate(&args)
        }
        Command::Asymptotics { model, d, estimator, variant, mc, seed, format } => {
            commands::asymptotics(model, d, estimator, variant.into(), mc, seed, format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
