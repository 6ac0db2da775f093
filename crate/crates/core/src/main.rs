use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cli;

use cli::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PRUNEKIT_OUT_DIR";

#[derive(Parser)]
#[command(name = "prunekit", version, about = "Magnitude pruning schedules, prosody metrics and listening-test statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dense toy model and save it as a checkpoint.
    Train(cli::train::TrainArgs),
    /// Magnitude-prune a checkpoint to a target sparsity.
    Prune(PruneArgs),
    /// Run a sparsity sweep on the toy task.
    Sweep(Box<cli::sweep::SweepArgs>),
    /// Compare pitch and duration statistics of two WAV directories.
    EvalAudio(cli::audio::EvalAudioArgs),
    /// Significance tests for MOS ratings or A/B preference counts.
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct PruneArgs {
    /// Input checkpoint (.prnt).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Fraction of prunable weights to zero, in [0, 1).
    #[arg(long, value_parser = cli::parse_sparsity)]
    sparsity: f64,
    /// Directory for `mask.prnt` and `pruned.prnt`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StatsMode {
    Mos,
    Ab,
}

#[derive(Args)]
pub struct StatsArgs {
    /// CSV with `condition,score` rows (mos) or `proposal,baseline,wins,n` rows (ab).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: StatsMode,
    #[arg(long, default_value_t = prunekit::stats::DEFAULT_ALPHA)]
    alpha: f64,
    /// Two-sided z-test p-values (ab mode).
    #[arg(long)]
    two_sided: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cli::train::run(a),
        Command::Prune(a) => cli::prune::run(a),
        Command::Sweep(a) => cli::sweep::run(*a),
        Command::EvalAudio(a) => cli::audio::run(a),
        Command::Stats(a) => cli::stats::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
