//! `vlcchan` — fit, sweep, and evaluate traffic-light VLC channel gain
//! models, map link budgets, and exercise the waveform measurement pipeline.
//!
//! Every subcommand accepts `--config <file.json>` holding flat key/value
//! defaults; explicit flags win on conflict. Failures print a one-line JSON
//! object to stderr and exit 2 (usage), 3 (data/IO), or 4 (numerical).

mod commands;
mod config;
mod io;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "vlcchan", version, about = "Visible-light channel gain modeling toolkit")]
struct Cli {
    /// JSON config file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a gain model to measurements.
    Fit(commands::FitArgs),
    /// Cross-validate every polynomial order configuration.
    Sweep(commands::SweepArgs),
    /// Evaluate a model at a point, grid, or dataset.
    Eval(commands::EvalArgs),
    /// Map model gain in dB over a region.
    Map(commands::MapArgs),
    /// Map link SNR and bit error probability.
    Ber(commands::BerArgs),
    /// Check the reflection-exclusion field of view.
    Fov(commands::FovArgs),
    /// Synthesize a received waveform.
    Simulate(commands::SimulateArgs),
    /// Bin a waveform and optionally measure gain against a reference.
    Bin(commands::BinArgs),
    /// Generate a synthetic measurement dataset from a model.
    Synth(commands::SynthArgs),
}

fn run(cli: Cli) -> vlc_channel::Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(args) => commands::cmd_fit(args, &cfg),
        Command::Sweep(args) => commands::cmd_sweep(args, &cfg),
        Command::Eval(args) => commands::cmd_eval(args, &cfg),
        Command::Map(args) => commands::cmd_map(args, &cfg),
        Command::Ber(args) => commands::cmd_ber(args, &cfg),
        Command::Fov(args) => commands::cmd_fov(args, &cfg),
        Command::Simulate(args) => commands::cmd_simulate(args, &cfg),
        Command::Bin(args) => commands::cmd_bin(args, &cfg),
        Command::Synth(args) => commands::cmd_synth(args, &cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let doc = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.to_string() }
        });
        eprintln!("{doc}");
        std::process::exit(e.exit_code());
    }
}
