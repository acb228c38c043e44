use std::path::PathBuf;
use std::process::ExitCode;

use binwave_cli::{parse_config_with, run, validate, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "binwave",
    version,
    about = "Time-bin MPS simulations of emitters in a waveguide"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV outputs and manifest.
    Run(Common),
    /// Run a scenario and compare emitter populations against its oracle.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bond_max: Option<usize>,
    #[arg(long)]
    delta_t: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            bond_max: self.bond_max,
            delta_t: self.delta_t,
            t_max: self.t_max,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Run(args) | Command::Validate(args)) = &cli.command;
    let cfg = match parse_config_with(&args.config, &args.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &cli.command {
        Command::Run(_) => match run(&cfg, &args.out) {
            Ok(m) => {
                println!(
                    "{}: wrote {} file(s) to {}; peak bond {}, discarded weight {:.3e}",
                    cfg.scenario.name(),
                    m.files.len(),
                    args.out.display(),
                    m.peak_bond,
                    m.discarded_weight
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Validate(_) => match validate(&cfg, &args.out) {
            Ok(r) => {
                println!(
                    "{} vs {}: max deviation {:.4e}, threshold {} -> {}",
                    cfg.scenario.name(),
                    r.oracle,
                    r.max_deviation,
                    r.threshold,
                    if r.passed { "PASS" } else { "FAIL" }
                );
                if r.passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
