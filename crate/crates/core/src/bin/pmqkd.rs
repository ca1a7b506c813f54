use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pmqkd::app::{run_subcommand, Command, RunOptions};
use pmqkd::config::parse_config;

#[derive(Parser)]
#[command(name = "pmqkd", version, about = "Phase-matching MDI-QKD key rates over satellite and fiber links")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write the POVM matrices and their eigenvalues as JSON.
    #[arg(long, global = true)]
    dump_povm: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Average key rate versus zenith angle with a matched fiber arm.
    AkrScan,
    /// Distribution of batch average key rates at one zenith angle.
    Pdr,
    /// Mean transmittance versus initial beam width.
    BeamwidthScan,
    /// Key rate at a single (eta, mu).
    RatePoint,
    /// Optimal intensity at a single eta.
    OptimizeMu,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::AkrScan => Command::AkrScan,
        Cmd::Pdr => Command::Pdr,
        Cmd::BeamwidthScan => Command::BeamwidthScan,
        Cmd::RatePoint => Command::RatePoint,
        Cmd::OptimizeMu => Command::OptimizeMu,
    };
    let Some(config_path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let result = std::fs::read_to_string(&config_path)
        .map_err(pmqkd::Error::from)
        .and_then(|text| parse_config(&text))
        .and_then(|config| {
            let config = match cli.seed {
                Some(s) => config.with_seed(s),
                None => config,
            };
            let opts = RunOptions {
                out_dir: cli.out,
                workers: cli.workers,
                dump_povm: cli.dump_povm,
            };
            run_subcommand(command, &config, &opts)
        });
    match result {
        Ok(report) => {
            for line in report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", command.name());
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
