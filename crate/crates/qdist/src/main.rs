use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qdist::{execute, CommandKind, ExperimentConfig};
use qdist_core::qlearn::SelectorKind;

#[derive(Parser)]
#[command(name = "qdist", version, about = "Grover-based distribution encoding, counting and hybrid Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a class distribution and report achieved vs target probabilities
    Encode(Args),
    /// Estimate class sizes with simulated quantum counting
    Count(Args),
    /// Run Q-learning with the quantum or classical selector
    Train(Args),
    /// Encode random targets over several register sizes
    Sweep(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the configured action selector
    #[arg(long, value_enum)]
    selector: Option<Selector>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selector {
    Quantum,
    Classical,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Encode(a) => (CommandKind::Encode, a),
        Command::Count(a) => (CommandKind::Count, a),
        Command::Train(a) => (CommandKind::Train, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
    };
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qdist: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(sel) = args.selector {
        cfg.policy.selector = match sel {
            Selector::Quantum => SelectorKind::Quantum,
            Selector::Classical => SelectorKind::Classical,
        };
    }
    match execute(kind, &cfg, &args.out) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qdist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
