use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hvi_core::runner::{run_many, Command, RunError, RunOptions};
use hvi_core::system::SolveMode;

/// Batch runner for coupled history-dependent inclusion scenarios.
#[derive(Parser)]
#[command(name = "hvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate smallness gates and probe the declared constants.
    Check(Common),
    /// Solve the coupled system.
    Solve(Common),
    /// Solve an inequality scenario and check the solved inequality.
    Dvhi(Common),
    /// Solve a contact scenario.
    Contact(Common),
    /// Refine the time grid and tabulate observed orders.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file; repeat to run a sweep.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long, env = "HVI_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, env = "HVI_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ProofFaithful,
    Staggered,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = RunError::new("argument", e.to_string().trim().to_string());
            println!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let (command, c) = match cli.command {
        Cmd::Check(c) => (Command::Check, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Dvhi(c) => (Command::Dvhi, c),
        Cmd::Contact(c) => (Command::Contact, c),
        Cmd::Convergence(c) => (Command::Convergence, c),
    };
    let opts = RunOptions {
        out_dir: c.out,
        seed: c.seed,
        mode: c.mode.map(|m| match m {
            Mode::ProofFaithful => SolveMode::ProofFaithful,
            Mode::Staggered => SolveMode::Staggered,
        }),
        jobs: c.jobs,
    };
    let mut out = std::io::stdout().lock();
    let mut code = 0;
    for (path, result) in c.configs.iter().zip(run_many(&c.configs, command, &opts)) {
        let this = match result {
            Ok(report) => {
                let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes"));
                report.exit_code()
            }
            Err(e) => {
                let _ = writeln!(out, "{}", e.to_json());
                eprintln!("hvi: {}: {e}", path.display());
                e.exit_code()
            }
        };
        code = code.max(this);
    }
    ExitCode::from(code as u8)
}
