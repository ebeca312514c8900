//! Command-line front end: `train`, `convert`, `eval`, `analyze` and
//! `report`, each writing into `<out>/<run>/`.

mod commands;
mod settings;

pub use commands::RunDir;
pub use settings::{
    calibration_batch, eval_axes, network_spec, parse_layers, probe_point, spatial_axes, NetworkSettings, RunConfig,
    Settings,
};

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;
use thiserror::Error;

use crate::calibration::CalibrationMode;
use crate::network::Activation;
use crate::pinn::ProblemId;
use crate::snn::Readout;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    crate::pinn::PinnError,
    crate::network::NetworkError,
    crate::network::ModelIoError,
    crate::snn::SnnError,
    crate::calibration::CalibrationError,
    crate::analysis::AnalysisError,
    crate::table::TableError,
    crate::tensor::TensorError,
    std::io::Error
);

#[derive(Debug, Parser)]
#[command(name = "pinnsnn", version, about = "Train PINNs, convert them to spiking networks and measure the conversion error")]
pub struct Cli {
    /// TOML file with run settings; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root; each run writes to `<out>/<run>/`.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write `model.json` plus the loss log.
    Train(Common),
    /// Fit thresholds, calibrate and write `snn/<mode>-t<T>.json`.
    Convert(Common),
    /// Evaluate the ANN or a converted SNN on the evaluation grid.
    Eval(EvalArgs),
    /// Timestep sweeps, bound validation, smoothing and Hessian checks.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Summarize every CSV of a run into `csv/report.csv`.
    Report(Common),
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    SweepT(Common),
    ValidateBound(Common),
    Smooth(Common),
    HessianCheck(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Ann,
    Snn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Simulation {
    Rate,
    Event,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "snn")]
    pub target: Target,
    /// `event` also runs the rate pass and records the largest difference.
    #[arg(long, value_enum, default_value = "rate")]
    pub sim: Simulation,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub problem: Option<ProblemId>,
    /// Run name (defaults to the problem name, with `-spinn` for separable runs).
    #[arg(long)]
    pub run: Option<String>,
    /// Hidden layers as `NxW` (count x width), e.g. `2x40`.
    #[arg(long)]
    pub layers: Option<String>,
    /// Separable network: one subnetwork per input axis.
    #[arg(long)]
    pub spinn: bool,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(short = 'T', long)]
    pub timesteps: Option<usize>,
    #[arg(long)]
    pub mode: Option<CalibrationMode>,
    #[arg(long)]
    pub readout: Option<Readout>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub calibration_steps: Option<usize>,
    #[arg(long)]
    pub calibration_lr: Option<f64>,
    #[arg(long)]
    pub calibration_points: Option<usize>,
    /// Evaluation points per axis.
    #[arg(long)]
    pub eval_points: Option<usize>,
    /// Smoothing cutoff as a fraction of the Nyquist wave number.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Timesteps for `sweep-t`, comma separated.
    #[arg(long = "t", value_delimiter = ',')]
    pub sweep_t: Option<Vec<usize>>,
}

impl Common {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            run: self.run.clone(),
            problem: self.problem,
            layers: self.layers.clone(),
            spinn: self.spinn.then_some(true),
            rank: self.rank,
            activation: self.activation,
            epochs: self.epochs,
            seed: self.seed,
            lr: self.lr,
            timesteps: self.timesteps,
            mode: self.mode,
            readout: self.readout,
            quantile: self.quantile,
            calibration_steps: self.calibration_steps,
            calibration_lr: self.calibration_lr,
            calibration_points: self.calibration_points,
            eval_points: self.eval_points,
            cutoff: self.cutoff,
            sweep_t: self.sweep_t.clone(),
            ..Default::default()
        }
    }
}

fn settings_for(cli: &Cli, common: &Common) -> Result<Settings, CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    Settings::resolve(&common.to_config().over(file))
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (verb, common) = match &cli.command {
        Command::Train(c) => ("train", c),
        Command::Convert(c) => ("convert", c),
        Command::Eval(e) => ("eval", &e.common),
        Command::Analyze { what } => match what {
            Analysis::SweepT(c) => ("sweep-t", c),
            Analysis::ValidateBound(c) => ("validate-bound", c),
            Analysis::Smooth(c) => ("smooth", c),
            Analysis::HessianCheck(c) => ("hessian-check", c),
        },
        Command::Report(c) => ("report", c),
    };
    if let Command::Report(c) = &cli.command {
        let file_run = match &cli.config {
            Some(_) => settings_for(cli, c).ok().map(|s| s.run),
            None => None,
        };
        let run = c
            .run
            .clone()
            .or(file_run)
            .or_else(|| c.problem.map(|p| if c.spinn { format!("{p}-spinn") } else { p.to_string() }))
            .ok_or_else(|| CliError::Usage("report needs --run or --problem".into()))?;
        return commands::report(&RunDir::new(&cli.out, &run));
    }
    let settings = settings_for(cli, common)?;
    let dir = RunDir::new(&cli.out, &settings.run);
    dir.write_config(verb, &settings)?;
    match &cli.command {
        Command::Train(_) => commands::train(&settings, &dir),
        Command::Convert(_) => commands::convert(&settings, &dir),
        Command::Eval(e) => commands::eval(&settings, &dir, e.target, e.sim),
        Command::Analyze { what } => match what {
            Analysis::SweepT(_) => commands::sweep_t(&settings, &dir),
            Analysis::ValidateBound(_) => commands::validate_bound(&settings, &dir),
            Analysis::Smooth(_) => commands::smooth(&settings, &dir),
            Analysis::HessianCheck(_) => commands::hessian_check(&settings, &dir),
        },
        Command::Report(_) => unreachable!("handled above"),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
