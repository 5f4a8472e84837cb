//! `xvar`: estimate extremal coefficients from loss data and bound the
//! extreme Value-at-Risk of a portfolio.

mod commands;
mod config;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xvar::Error;

use crate::config::{FileConfig, Format, Settings};

#[derive(Parser, Debug)]
#[command(name = "xvar", version, about = "Bounds on extreme Value-at-Risk under extremal-coefficient constraints")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "XVAR_SEED")]
    seed: Option<u64>,

    /// Threshold quantile level for tail fits and coefficient estimates.
    #[arg(long, global = true, env = "XVAR_Q0")]
    q0: Option<f64>,

    /// Tail index. Required by bounds, tm-lp, sectors and rv simulation;
    /// overrides the fitted value in the pipeline.
    #[arg(long, global = true, env = "XVAR_XI")]
    xi: Option<f64>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true, env = "XVAR_OUTPUT")]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, env = "XVAR_FORMAT")]
    format: Option<Format>,

    /// Flat JSON file with defaults for any of: seed, q0, xi, format, lambda,
    /// max_dim, points, kkt_samples, years.
    #[arg(long, global = true, env = "XVAR_CONFIG")]
    config: Option<PathBuf>,

    /// Ridge parameter of the calibration step.
    #[arg(long, global = true, env = "XVAR_LAMBDA")]
    lambda: Option<f64>,

    /// Largest dimension solved with the full Tawn–Molchanov LP.
    #[arg(long, global = true, env = "XVAR_MAX_DIM")]
    max_dim: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit GPD tails with a common tail index and estimate extremal
    /// coefficients of the scale-balanced panel.
    Estimate(commands::EstimateArgs),
    /// Project raw coefficients onto the valid cone.
    Calibrate(commands::CalibrateArgs),
    /// Lower and upper bounds on rho and chi.
    Bounds(commands::BoundsArgs),
    /// Solve the Tawn–Molchanov LP and verify its optimality certificate.
    TmLp(commands::TmLpArgs),
    /// Bounds for the market-plus-sectors model.
    Sectors(commands::SectorsArgs),
    /// Draw a loss panel from a discrete spectral measure (always CSV).
    Simulate(commands::SimulateArgs),
    /// Run estimation, calibration, bounds, VaR curves and return levels.
    Pipeline(pipeline::PipelineArgs),
}

/// An error tagged with the stage it came from.
pub struct Failure {
    pub stage: Option<&'static str>,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { stage: None, error }
    }
}

pub trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for xvar::Result<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure {
            stage: Some(name),
            error,
        })
    }
}

/// 2 input, 3 data, 4 inconsistency, 5 numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::IncompleteInput(_)
        | Error::InvalidXi(_)
        | Error::OutOfRange { .. }
        | Error::DimensionTooLarge { .. }
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::NoExceedances
        | Error::DegenerateSample
        | Error::InsufficientData { .. }
        | Error::QuantileBelowThreshold { .. } => 3,
        Error::InconsistentInput(_) | Error::Infeasible => 4,
        Error::NumericalFailure(_) | Error::NonConvergence(_) | Error::Unbounded => 5,
    }
}

fn settings(g: &GlobalArgs) -> Result<Settings, Failure> {
    let file = match &g.config {
        Some(p) => FileConfig::load(p).stage("config")?,
        None => FileConfig::default(),
    };
    let flags = FileConfig {
        seed: g.seed,
        q0: g.q0,
        xi: g.xi,
        format: g.format,
        lambda: g.lambda,
        max_dim: g.max_dim,
        ..Default::default()
    };
    Ok(Settings::resolve(flags, file))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut s = settings(&cli.global)?;
    let out = match cli.command {
        Command::Estimate(a) => commands::estimate(&a, &s)?,
        Command::Calibrate(a) => commands::calibrate(&a, &s)?,
        Command::Bounds(a) => {
            if let Some(p) = a.points {
                s.points = p;
            }
            commands::bounds(&a, &s)?
        }
        Command::TmLp(a) => {
            if let Some(n) = a.kkt_samples {
                s.kkt_samples = n;
            }
            commands::tm_lp(&a, &s)?
        }
        Command::Sectors(a) => commands::sectors(&a, &s)?,
        Command::Simulate(a) => commands::simulate(&a, &s)?,
        Command::Pipeline(a) => {
            if let Some(p) = a.points {
                s.points = p;
            }
            if let Some(y) = &a.years {
                s.years = y.clone();
            }
            pipeline::pipeline(&a, &s)?
        }
    };
    out.write(cli.global.output.as_deref()).stage("output")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match f.stage {
                Some(stage) => eprintln!("error [{stage}]: {}", f.error),
                None => eprintln!("error: {}", f.error),
            }
            ExitCode::from(exit_code(&f.error))
        }
    }
}

/// Which bound computation `bounds` should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Pick from the shape of the family.
    Auto,
    Frechet,
    Dvariate,
    TmLp,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
