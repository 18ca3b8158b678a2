//! `puretone` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resonance, 4 blow-up,
//! 5 convergence failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use puretone::error::Category;
use puretone::exec::{configure_threads, Execution};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Failure, Outcome, Status};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "puretone", version, about = "Pure tone periodic solutions over entropy profiles")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, env = "PURETONE_CONFIG")]
    config: Option<PathBuf>,
    /// Bundled recipe, used when the configuration has no problem.
    #[arg(long, global = true, env = "PURETONE_RECIPE")]
    recipe: Option<String>,
    /// Directory for reports and data files.
    #[arg(long, global = true, env = "PURETONE_OUT", default_value = "puretone-out")]
    out: PathBuf,
    /// Seed for randomized commands; overrides the configuration.
    #[arg(long, global = true, env = "PURETONE_SEED")]
    seed: Option<u64>,
    /// Worker threads; 1 runs every loop sequentially.
    #[arg(long, global = true, env = "PURETONE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divisor table at the reference period.
    Divisors,
    /// Base frequencies, or eigenfrequencies with --general.
    Freq {
        /// Integrate the Sturm-Liouville system and write eigenfunctions.
        #[arg(long)]
        general: bool,
    },
    /// Nonresonance check of the configured mode.
    Resonance,
    /// Resonance statistics over random profiles.
    Scan,
    /// Pure tone solutions at the configured amplitudes.
    Solve,
    /// Solve, assemble the periodic tiling and export it.
    Tile,
    /// Grid-refinement study of an assembled tiling, or check of a saved one.
    Verify {
        /// A tile written by `tile` in JSON format.
        #[arg(long)]
        tile: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Divisors => "divisors",
            Command::Freq { .. } => "freq",
            Command::Resonance => "resonance",
            Command::Scan => "scan",
            Command::Solve => "solve",
            Command::Tile => "tile",
            Command::Verify { .. } => "verify",
        }
    }
}

fn load_config(args: &GlobalArgs) -> Result<RunConfig, config::ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.recipe {
        cfg.recipe = Some(name.clone());
        cfg.problem = None;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.resolve()
}

fn exit_code(failure: &Failure) -> u8 {
    match failure {
        Failure::Config(_) => 2,
        Failure::Library(e) => match e.category() {
            Category::Config => 2,
            Category::Resonance => 3,
            Category::BlowUp => 4,
            Category::Convergence => 5,
        },
    }
}

fn write_report(out: &std::path::Path, command: &str, cfg: &RunConfig, outcome: &Outcome) -> Result<(), Failure> {
    let config_value = serde_json::to_value(cfg).map_err(puretone::Error::from)?;
    let canonical = serde_json::to_vec(&config_value).map_err(puretone::Error::from)?;
    let hash = Sha256::digest(&canonical);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let report = json!({
        "command": command,
        "status": match outcome.status {
            Status::Success => "ok",
            Status::Resonant => "resonant",
        },
        "provenance": {
            "config_sha256": hex,
            "puretone_version": puretone::VERSION,
            "cli_version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.seed,
        },
        "config": config_value,
        "result": outcome.result,
    });
    std::fs::create_dir_all(out).map_err(puretone::Error::from)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(puretone::Error::from)?;
    text.push('\n');
    std::fs::write(out.join(format!("{command}.json")), text).map_err(puretone::Error::from)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Status, Failure> {
    let cfg = load_config(&cli.global)?;
    let exec = match cli.global.threads {
        Some(0) => return Err(Failure::Config("--threads must be at least 1".into())),
        Some(1) => Execution::Sequential,
        Some(n) => {
            configure_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let out = &cli.global.out;
    let outcome = match &cli.command {
        Command::Divisors => commands::divisors(&cfg, out, exec),
        Command::Freq { general } => commands::freq(&cfg, out, *general),
        Command::Resonance => commands::resonance(&cfg, exec),
        Command::Scan => commands::scan(&cfg, exec),
        Command::Solve => commands::solve(&cfg, exec),
        Command::Tile => commands::tile(&cfg, out, exec),
        Command::Verify { tile } => commands::verify_cmd(&cfg, tile.as_deref(), exec),
    }?;
    write_report(out, cli.command.name(), &cfg, &outcome)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Resonant) => ExitCode::from(3),
        Err(failure) => {
            match &failure {
                Failure::Config(msg) => eprintln!("error: {msg}"),
                Failure::Library(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&failure))
        }
    }
}
