use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coinflip_cli::config::{ExperimentConfig, ProtocolSource};
use coinflip_cli::{cmd_normalize, cmd_run, cmd_verify, CliError, Loaded, Mode, Overrides};
use coinflip_core::description::ProtocolDescription;
use coinflip_core::zoo::ZooSpec;

/// Simulate coin-flipping protocols under adaptive corruption attacks.
#[derive(Parser)]
#[command(name = "coinflip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report.
    Run(Common),
    /// Normalize a protocol and report the normality conditions.
    Normalize(Common),
    /// Run the randomized property batteries.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Perturb one identity on purpose; the run must then fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads for Monte Carlo; never changes results.
    #[arg(long)]
    workers: Option<usize>,
    /// Report path, overriding `output.report`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl Common {
    fn load(&self, required: bool) -> Result<Loaded, CliError> {
        let overrides = Overrides {
            seed: self.seed,
            trials: self.trials,
            workers: self.workers,
            out: self.out.clone(),
            mode: self.mode,
        };
        match &self.config {
            Some(path) => Loaded::from_path(path, &overrides),
            None if required => Err(CliError::Usage("--config is required".into())),
            None => {
                let placeholder = ProtocolSource::Inline(ProtocolDescription::Generator(ZooSpec::TwoRoundToy));
                Loaded::from_config(ExperimentConfig::new(placeholder), &overrides)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Run(c) => c.load(true).and_then(|l| cmd_run(&l, &mut stdout)),
        Command::Normalize(c) => c.load(true).and_then(|l| cmd_normalize(&l, &mut stdout)),
        Command::Verify { common, inject_fault } => common.load(false).and_then(|mut l| {
            l.config.verify.inject_fault |= *inject_fault;
            cmd_verify(&l, &mut stdout)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("coinflip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
