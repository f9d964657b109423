use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sirl_experiments::commands;
use sirl_experiments::{CliError, ExperimentConfig, Method};

/// Stochastic inverse reinforcement learning experiments on objectworld.
#[derive(Parser, Debug)]
#[command(name = "sirl", version)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Restrict training to one method (maxent or sirl).
    #[arg(long, global = true, value_name = "NAME")]
    method: Option<String>,
    /// Wide sweep axes and the full iteration budget.
    #[arg(long, global = true)]
    full_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and write truth grids.
    GenWorld,
    /// Train each method and report EVDs.
    Recovery,
    /// Mine a diverse low-EVD solution set from a trained mixture.
    Robustness,
    /// Hyperparameter sweep with per-value mean and standard error.
    Sweep,
    /// Score a weight-vector CSV.
    EvalEvd {
        /// One-line CSV of weights.
        weights: PathBuf,
        /// Instance file; generated from the configuration when omitted.
        #[arg(long, value_name = "PATH")]
        instance: Option<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    if let Some(name) = &cli.method {
        config.methods.run = vec![name.parse::<Method>()?];
    }
    if cli.full_scale {
        config.apply_full_scale();
    }
    config.validate()?;
    Ok(config)
}

/// Exit status for a run that wrote its outputs: 0, or 3 if MCEM did not converge.
fn finished(converged: bool) -> i32 {
    if converged {
        0
    } else {
        log::warn!("results written, but MCEM hit its iteration budget before converging");
        3
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let config = resolve(cli)?;
    let out = config.output.dir.clone();
    match &cli.command {
        Command::GenWorld => {
            commands::gen_world(&config, &out)?;
            Ok(0)
        }
        Command::Recovery => {
            let report = commands::recovery(&config, &out)?;
            for row in &report.rows {
                println!("{}\t{:.6}", row.method, row.evd);
            }
            Ok(finished(report.converged()))
        }
        Command::Robustness => {
            let report = commands::robustness(&config, &out)?;
            println!(
                "{} members after {} draws (complete: {})",
                report.set.len(),
                report.set.draws,
                report.set.complete
            );
            Ok(finished(report.converged))
        }
        Command::Sweep => {
            let report = commands::sweep(&config, &out)?;
            for s in &report.summary {
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
                println!(
                    "{}={}\t{}\t{} ± {}\t({} failed)",
                    s.axis,
                    s.value,
                    s.method,
                    fmt(s.mean_evd),
                    fmt(s.std_err),
                    s.failures
                );
            }
            Ok(finished(report.converged))
        }
        Command::EvalEvd { weights, instance } => {
            let out_dir = cli.out.as_deref();
            let evd = commands::eval_evd(&config, weights, instance.as_ref(), out_dir)?;
            println!("{evd}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
