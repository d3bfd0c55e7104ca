use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbilinear::experiment::{
    cmd_benchmark_prediction, cmd_collect, cmd_fit, cmd_scaling_study, ExperimentConfig,
};

/// Bilinear kernel EDMD surrogates for control-affine systems.
///
/// Configs are TOML files; every key is optional. Defaults: system =
/// "zone_temp"; kernel n = 1, s = 1, scale = 1.0; sampling dt = 0.01,
/// substeps = 100; data d = [5, 7, ..., 19], d_j = 2, seed = 0,
/// sigma_threshold = 0.1; bounds c1 = c2 = 1.0; benchmark horizon = 100,
/// realizations = 20, monomial_degree = 3; scaling dt_values = [0.1, 0.05,
/// 0.025, 0.0125], d_values = [5, 9, 17], scaling_dt = 0.005,
/// state_points = input_points = 101.
#[derive(Parser)]
#[command(name = "kbilinear", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample centers and input triplets and write the dataset files.
    Collect(Common),
    /// Fit the bilinear surrogate and write model.json.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `collect`; collected afresh if omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Open-loop prediction errors of kEDMD and the baselines.
    BenchmarkPrediction(Common),
    /// Residual rates, bound margins and C1 calibration.
    ScalingStudy(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: output_dir from the config, else "out"].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides data.seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf), ExitCode> {
        let mut cfg = match &self.config {
            Some(path) if !path.is_file() => {
                eprintln!("error: config file {} not found", path.display());
                return Err(ExitCode::from(2));
            }
            Some(path) => ExperimentConfig::load(path).map_err(fail)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.data.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

fn fail(e: kbilinear::error::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::FAILURE
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Collect(common) => {
            let (cfg, out) = common.resolve()?;
            let s = cmd_collect(&cfg, &out).map_err(fail)?;
            warn(&s.warnings);
            print!("{s}");
        }
        Command::Fit { common, dataset } => {
            let (cfg, out) = common.resolve()?;
            let s = cmd_fit(&cfg, dataset.as_deref(), &out).map_err(fail)?;
            warn(&s.warnings);
            print!("{s}");
        }
        Command::BenchmarkPrediction(common) => {
            let (cfg, out) = common.resolve()?;
            let s = cmd_benchmark_prediction(&cfg, &out).map_err(fail)?;
            warn(&s.warnings);
            print!("{s}");
        }
        Command::ScalingStudy(common) => {
            let (cfg, out) = common.resolve()?;
            let s = cmd_scaling_study(&cfg, &out).map_err(fail)?;
            warn(&s.report.flags);
            print!("{s}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
