use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selfcorrect_cli::commands::{cmd_bounds, cmd_run, cmd_sweep, load, Overrides};
use selfcorrect_cli::validate::{run_all, Hooks};
use selfcorrect_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "selfcorrect",
    version,
    about = "Self-correcting retraining loop experiments"
)]
struct Cli {
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a file value, e.g. `--set loop.lambda=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Loop seed for `run`, base seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Trailing generations summarized by `sweep`.
    #[arg(long = "late-window", global = true)]
    late_window: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One loop run; writes trajectory.csv.
    Run,
    /// The lambda x gamma grid with replicates; writes runs/, summary.csv, failures.csv.
    Sweep,
    /// Stability bound table; writes bounds.csv.
    Bounds,
    /// Runs the built-in property checks.
    Validate,
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Command::Validate = cli.command {
        let outcomes = run_all(&Hooks::default());
        let failed = outcomes.iter().filter(|o| o.failure.is_some()).count();
        for o in &outcomes {
            match &o.failure {
                None => println!("PASS {}", o.name),
                Some(why) => println!("FAIL {}: {why}", o.name),
            }
        }
        println!(
            "{}/{} properties passed",
            outcomes.len() - failed,
            outcomes.len()
        );
        return Ok(if failed == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }

    let config = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let overrides = Overrides {
        set: cli.set,
        out: cli.out,
        seed: cli.seed,
        late_window: cli.late_window,
    };
    let exp = load(&config, &overrides)?;
    match cli.command {
        Command::Run => {
            let path = cmd_run(&exp, overrides.seed)?;
            println!("wrote {}", path.display());
        }
        Command::Sweep => {
            let report = cmd_sweep(&exp, overrides.seed)?;
            println!(
                "{} runs, {} failed; wrote {}",
                report.runs,
                report.failures,
                report.summary.display()
            );
        }
        Command::Bounds => {
            let path = cmd_bounds(&exp)?;
            println!("wrote {}", path.display());
        }
        Command::Validate => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
