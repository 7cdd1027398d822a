use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmarl_cli::{cmd_eval, cmd_generate, cmd_inspect, cmd_train, CliError, EvalOptions, RunConfig, TrainOptions};
use cmarl_core::ExperimentKind;

/// Communicative multi-agent DQN for 3D landmark localization.
#[derive(Debug, Parser)]
#[command(name = "cmarl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic corpus described by the config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory, overriding `dataset.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Family seed, overriding `dataset.synthetic.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every network of the experiment and keep the best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_kind)]
        experiment: Option<ExperimentKind>,
    },
    /// Evaluate checkpoints on the test split and write result CSVs.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeat to evaluate several networks as one experiment.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `eval.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_kind)]
        experiment: Option<ExperimentKind>,
    },
    /// Verify a checkpoint and print what it holds.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::parse(s).ok_or_else(|| {
        let all: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown experiment {s:?}; expected one of {}", all.join(", "))
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CMARL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CMARL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut stdout = std::io::stdout();
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = RunConfig::load(&config)?;
            cmd_generate(&cfg, out.as_deref(), seed, &mut stdout)?;
        }
        Command::Train {
            config,
            out,
            seed,
            experiment,
        } => {
            let cfg = RunConfig::load(&config)?;
            cmd_train(&cfg, &TrainOptions { out, seed, experiment }, &mut stdout)?;
        }
        Command::Eval {
            config,
            checkpoint,
            out,
            seed,
            experiment,
        } => {
            let config = config.map(RunConfig::load).transpose()?;
            let opts = EvalOptions {
                checkpoints: checkpoint,
                config,
                out,
                seed,
                experiment,
            };
            cmd_eval(&opts, &mut stdout)?;
        }
        Command::Inspect { checkpoint } => {
            print!("{}", cmd_inspect(&checkpoint)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
