mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cutplane", version, about = "Cutting-plane solvers for multistage stochastic linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model with one method or all six.
    Run(RunArgs),
    /// Print the extensive-form optimal value.
    Oracle(OracleArgs),
    /// Compare the runs stored in a directory.
    Report {
        dir: PathBuf,
    },
    /// Check a model and list every problem found.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Portfolio,
    Inventory,
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Model file in the cutplane-sp/1 format.
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    pub model: Option<PathBuf>,
    /// Generate a benchmark instance instead of reading a file.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Stages of a generated instance.
    #[arg(long = "T", default_value_t = 5)]
    pub stages: usize,
    /// Realizations per stage of a generated instance.
    #[arg(long = "M", default_value_t = 4)]
    pub realizations: usize,
    /// Risky assets of a generated portfolio instance.
    #[arg(long = "n", default_value_t = 3)]
    pub assets: usize,
    /// Seed for instance generation and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the compiled model to this path.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Method slug (sddp, sddp-cs1, sddp-cs2, muda, cusmuda-cs1, cusmuda-cs2) or all-six.
    #[arg(long, default_value = "all-six")]
    pub method: String,
    /// Forward scenarios per iteration.
    #[arg(long = "N", default_value_t = 1)]
    pub forward: usize,
    /// Scenarios for the upper bound.
    #[arg(long = "S", default_value_t = 200)]
    pub evaluation: usize,
    /// Visit every tree node instead of sampling.
    #[arg(long, conflicts_with_all = ["forward", "evaluation"])]
    pub exhaustive: bool,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    /// Relative gap tolerance; 0.05 for inventory instances, 0.1 otherwise.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Tolerance of the cut-selection comparisons.
    #[arg(long, default_value_t = cutplane::cutpool::DEFAULT_EPSILON0)]
    pub epsilon0: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Constant lower bound for recourse functions without a floor.
    #[arg(long, allow_hyphen_values = true)]
    pub lower_bound: Option<f64>,
    #[arg(long, default_value = "cutplane-out")]
    pub out: PathBuf,
    #[arg(long, env = "CUTPLANE_WORKERS", default_value_t = 1)]
    pub workers: usize,
    /// Record zero elapsed time so outputs are byte-identical across runs.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest scenario tree, in nodes, to expand.
    #[arg(long, default_value_t = cutplane::program::DEFAULT_TREE_CAP)]
    pub tree_cap: usize,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sampled paths for the recourse check.
    #[arg(long, default_value_t = 8)]
    pub scenarios: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Oracle(args) => commands::oracle(&args),
        Command::Report { dir } => commands::report(&dir),
        Command::Validate(args) => commands::validate(&args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_MODEL)
        }
    }
}
