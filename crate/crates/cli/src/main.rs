use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tmc_core::config::ScenarioConfig;
use tmc_core::run::{run_scenario, run_table1, RunError};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

/// Third-medium contact simulations with 20-node hexahedra.
#[derive(Parser)]
#[command(name = "tmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Config file, or the name of a built-in config (box_self_contact,
    /// pneumatic_box, pneumatic_box_inflation, rotating_box, punch, actuator)
    config: String,
    /// Override a config key, e.g. --set materials.M0.gamma=1e-6
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the VTK series, probes.csv and report.json
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: outputs.directory of the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against its mesh without solving
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Run the config's [table1] grid of regularization parameters
    Table1 {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run_error(e: RunError) -> ExitCode {
    match e {
        RunError::Config(e) => fail(EXIT_CONFIG, e),
        other => fail(EXIT_OTHER, other),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (source, out) = match &cli.command {
        Command::Run { source, out } | Command::Table1 { source, out } => (source, out.clone()),
        Command::Validate { source } => (source, None),
    };
    let (cfg, base) = match ScenarioConfig::load(&source.config, &source.overrides) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let out = out.unwrap_or_else(|| cfg.outputs.directory.clone());

    match cli.command {
        Command::Validate { .. } => match cfg.prepare(&base) {
            Ok(p) => {
                let asm = &p.solver.assembler;
                println!(
                    "ok: {} elements, {} nodes, {} free dofs",
                    asm.problem.mesh.n_elements(),
                    asm.problem.mesh.n_nodes(),
                    asm.dofs.n_free()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::Run { .. } => match run_scenario(&cfg, &base, &out) {
            Ok(outcome) if outcome.summary.completed => {
                println!(
                    "completed: {} steps, {} Newton iterations, outputs in {}",
                    outcome.summary.accepted_steps,
                    outcome.summary.total_newton_iterations,
                    out.display()
                );
                ExitCode::SUCCESS
            }
            Ok(outcome) => fail(
                EXIT_NONCONVERGENCE,
                outcome.summary.failure.unwrap_or_else(|| "run did not complete".into()),
            ),
            Err(e) => run_error(e),
        },
        Command::Table1 { .. } => match run_table1(&cfg, &base, &out) {
            Ok(cells) => {
                print!("{}", tmc_core::run::table1_markdown(&cells));
                ExitCode::SUCCESS
            }
            Err(e) => run_error(e),
        },
    }
}
