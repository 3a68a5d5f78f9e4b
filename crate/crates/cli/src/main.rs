mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulator for two competing agents running sequential binary hypothesis
/// tests with randomized belief signaling.
#[derive(Debug, Parser)]
#[command(name = "seqduel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a batch of trials from a configuration file.
    Run(RunArgs),
    /// Sweep the signaling or fusion parameter.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Run every verification suite with fixed seeds.
    Verify(VerifyArgs),
    /// Rerun the two-agent example and compare against the published numbers.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrueStateArg {
    Theta0,
    Theta1,
    Prior,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for the batch; overrides the configuration file.
    #[arg(long, env = "SEQDUEL_SEED")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum)]
    pub true_state: Option<TrueStateArg>,
    /// Trial indices to export to trajectories.csv, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub trajectories: Vec<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// Receiver error of the expected signal over an alpha grid.
    Alpha {
        /// Sender belief p(theta1).
        #[arg(long)]
        belief: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Mean stopping time over constant fusion weights.
    W {
        /// Defaults to the built-in two-agent example.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        grid: Vec<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// The agent whose fusion weight is swept.
        #[arg(long, value_enum, default_value = "b")]
        agent: AgentArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AgentArg {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Reduced trial counts; the structural checks are unchanged.
    #[arg(long)]
    pub quick: bool,
    /// Claim alpha = 0.9 is optimal (negative control; must fail).
    #[arg(long, hide = true)]
    pub inject_alpha_bug: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = match &cli.command {
        Command::Run(a) => a.common.jobs,
        Command::Sweep(SweepCommand::W { common, .. }) => common.jobs,
        Command::Sweep(SweepCommand::Alpha { .. }) => None,
        Command::Verify(a) => a.common.jobs,
        Command::ReproducePaper(a) => a.common.jobs,
    };
    let pool = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {jobs:?} workers: {e}");
            return ExitCode::from(commands::EXIT_CONFIG);
        }
    };
    let code = pool.install(|| match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Sweep(cmd) => commands::sweep(cmd),
        Command::Verify(args) => commands::verify(args),
        Command::ReproducePaper(args) => commands::reproduce(args),
    });
    ExitCode::from(code)
}
