use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robustctl::error::{EXIT_CONFIG, EXIT_RUNTIME};
use robustctl::{emit_report, load_config, run_command, Command, Parallel};

#[derive(Parser)]
#[command(
    name = "robustctl",
    version,
    about = "Robust stochastic control and zero-sum game experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for path simulation.
    #[arg(long, global = true, env = "ROBUSTCTL_THREADS")]
    threads: Option<usize>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the lower and upper Isaacs equations on the configured grid.
    SolvePde,
    /// Estimate the value by simulating strategy and adversary families.
    Simulate,
    /// Monte Carlo value against the PDE plus the filtration comparison.
    Compare,
    /// Dynamic programming residuals for the configured stopping rules.
    DppCheck,
    /// Tabulate lower, mixed and upper Hamiltonians.
    HamiltonianReport,
    /// Full pipeline.
    Run,
    /// Check the configuration and the model assumptions only.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::SolvePde => Command::SolvePde,
        Cmd::Simulate => Command::Simulate,
        Cmd::Compare => Command::Compare,
        Cmd::DppCheck => Command::DppCheck,
        Cmd::HamiltonianReport => Command::HamiltonianReport,
        Cmd::Run => Command::Run,
        Cmd::Validate => Command::Validate,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let mut cfg = match load_config(&path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let exec = match Parallel::new(threads) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    };
    let dir = cfg.output.dir.clone();
    let report = run_command(&exec, command, cfg);
    let code = report.exit_code(cli.strict);
    if let Err(e) = emit_report(&report, &dir, cli.strict) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME as u8);
    }
    for check in &report.checks {
        println!(
            "{} {:<48} {:.6e} <= {:.6e}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.tolerance
        );
    }
    for w in &report.warnings {
        println!("WARN {w}");
    }
    if let Some((kind, message, _)) = &report.error {
        eprintln!("error ({kind}): {message}");
    }
    println!("summary: {}", dir.join("summary.json").display());
    ExitCode::from(code as u8)
}
