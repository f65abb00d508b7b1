//! `nflow` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "nflow",
    version,
    about = "Normalizing-flow demos, training, sampling and audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Push normal draws through stretch, rotate, shear and back; write each stage as CSV.
    DemoTransforms {
        #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the density of a disc's area when its diameter is uniform on [5, 6].
    DemoDisc {
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid maximum-likelihood estimate of a coin's bias.
    DemoCoin {
        #[arg(long, default_value_t = 2)]
        successes: u64,
        #[arg(long, default_value_t = 4)]
        trials: u64,
        #[arg(long, default_value_t = 0.1)]
        grid: f64,
    },
    /// Fit a coupling flow to a CSV file or a directory of PGM images.
    Train(TrainArgs),
    /// Draw samples from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file, or a directory of PGMs for image models.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-row log-density of a CSV file under a checkpoint.
    Logprob {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Round-trip and numerical-Jacobian audit of a checkpoint.
    Check {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        probes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// CSV file, or with --image a directory of PGM files.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints and loss.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    couplings: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Insert LU-parameterized linear mixing between couplings.
    #[arg(long)]
    lu_mixing: bool,
    /// Treat --data as a directory of PGM images.
    #[arg(long)]
    image: bool,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    clip_norm: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a checkpoint every N steps (0: only the final one).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Evaluate the held-out NLL every N steps (0: never).
    #[arg(long, default_value_t = 50)]
    eval_every: usize,
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
    let result = match cli.command {
        Command::DemoTransforms { count, seed, out } => {
            commands::demo_transforms(count as usize, seed, &out)
        }
        Command::DemoDisc { out } => commands::demo_disc(&out),
        Command::DemoCoin {
            successes,
            trials,
            grid,
        } => commands::demo_coin(successes, trials, grid),
        Command::Train(a) => commands::train(a),
        Command::Sample {
            checkpoint,
            count,
            seed,
            out,
        } => commands::sample(&checkpoint, count as usize, seed, &out),
        Command::Logprob {
            checkpoint,
            data,
            out,
        } => commands::logprob(&checkpoint, &data, &out),
        Command::Check {
            checkpoint,
            probes,
            seed,
        } => commands::check(&checkpoint, probes as usize, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
