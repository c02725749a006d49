use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use infogame_cli::report::{write_file, Timing};
use infogame_cli::{run, CliError, Command, ConfigError, RunConfig};

/// Solve, simulate and check continuous-time games with one-sided information.
#[derive(Parser)]
#[command(name = "infogame", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Backward recursion; writes value slices.
    Solve(RunArgs),
    /// Revelation kernel, Monte Carlo estimators and path diagnostics.
    Simulate(RunArgs),
    /// Informed strategy against the uninformed catalog.
    Match(RunArgs),
    /// Obstacle and conjugate residuals, non-revealing set.
    Diagnose(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

const THREADS_VAR: &str = "INFOGAME_THREADS";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Match(a) => (Command::Match, a),
        Cmd::Diagnose(a) => (Command::Diagnose, a),
    };
    match execute(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command, args: RunArgs) -> Result<bool, CliError> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let threads =
            v.parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| ConfigError::Invalid {
                    field: "INFOGAME_THREADS",
                    message: format!("expected a positive integer, got `{v}`"),
                })?;
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let start = Instant::now();
    let report = run(command, &cfg, &out)?;
    let timing = Timing {
        command,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    let body = serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n";
    write_file(&out.join("timing.json"), &body)?;
    for c in &report.checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        println!("{verdict} {:<32} {:.6e}", c.name, c.observed);
    }
    println!(
        "{}: {} -> {}",
        command,
        report.game,
        out.join("report.json").display()
    );
    Ok(report.passed)
}
