//! Command-line entry point: generate data, train, evaluate retrieval,
//! check gradients, and export embeddings, all driven by one JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use strata::commands::{self, Overrides};

#[derive(Parser)]
#[command(
    name = "strata",
    version,
    about = "Structured metric learning at desk scale: synthetic datasets, joint \
             classification + ranking training, retrieval evaluation, gradient checking."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset manifest.
    Generate(Common),
    /// Train a model; writes checkpoint.json and epochs.jsonl.
    Train(Common),
    /// Score retrieval precision and accuracy for a checkpoint.
    Eval(Common),
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Flip one gradient's sign to prove the check catches it.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Project embeddings onto two principal components as CSV.
    ExportPca(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Suppress summary output.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, quiet: self.quiet }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(common) => commands::generate(&common.config, &common.overrides()),
        Command::Train(common) => commands::train(&common.config, &common.overrides()),
        Command::Eval(common) => commands::eval(&common.config, &common.overrides()),
        Command::Gradcheck { common, corrupt_gradient } => {
            commands::gradcheck(&common.config, &common.overrides(), *corrupt_gradient)
        }
        Command::ExportPca(common) => commands::export_pca(&common.config, &common.overrides()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(err.exit_code())
        }
    }
}
