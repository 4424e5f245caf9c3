use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsotraj::commands::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "fsotraj", version, about = "Energy-aware UAV trajectory planning for FSO backhaul links")]
struct Cli {
    /// TOML scenario; the built-in reference scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Reserved; the planners are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on convex iterations per segment.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Record wall-clock times in convergence.csv.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Service radius for each configured visibility.
    Boundary,
    /// Maximize service time under the energy budget.
    Plan,
    /// Rotation-invariant low-complexity service loop.
    PlanLc,
    /// Maximize bits per joule over a fixed horizon.
    PlanEe,
    /// Shortest mission delivering the data demand.
    PlanOptime,
    /// Straight or circular reference trajectory.
    Baseline,
    /// Run `plan` for every configured visibility.
    SweepVisibility,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Boundary => Command::Boundary,
        Cmd::Plan => Command::Plan,
        Cmd::PlanLc => Command::PlanLc,
        Cmd::PlanEe => Command::PlanEe,
        Cmd::PlanOptime => Command::PlanOptime,
        Cmd::Baseline => Command::Baseline,
        Cmd::SweepVisibility => Command::SweepVisibility,
    };
    let opts = RunOptions { command, config: cli.config, out: cli.out, max_iters: cli.max_iters, seed: cli.seed, timing: cli.timing };
    match run(&opts) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fsotraj: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
