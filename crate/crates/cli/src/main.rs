use std::path::PathBuf;
use std::process::ExitCode;

use ambilink::commands;
use ambilink::config::{load_toml, ExperimentSpec, RunConfig};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ambilink",
    version,
    about = "Hide QR codes in video and read them back through a simulated camera"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the channel simulation and evaluation trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed one code per frame of a frame store.
    Encode {
        #[arg(long)]
        input: PathBuf,
    },
    /// Pass an encoded store through the camera channel.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        /// Channel preset; overrides the config.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Decode a captured store.
    Decode {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run an evaluation recipe and write CSV and CDF reports.
    Evaluate,
    /// Decode a synthetic stream and print playback positions.
    SyncDemo,
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(path) => load_toml(path),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Encode { input } => {
            let sidecar = commands::encode(input, &cli.out, &run_config(&cli)?)?;
            println!(
                "encoded {} packets into {}",
                sidecar.packets.len(),
                cli.out.display()
            );
        }
        Command::Simulate { input, preset } => {
            let mut cfg = run_config(&cli)?;
            if let Some(p) = preset {
                cfg.channel.preset = p.clone();
            }
            let sidecar = commands::simulate(input, &cli.out, &cfg, seed)?;
            println!(
                "captured {} packets at {} fps into {}",
                sidecar.truth.packets.len(),
                sidecar.fps_rx,
                cli.out.display()
            );
        }
        Command::Decode { input } => {
            let report = commands::decode(input, &cli.out, &run_config(&cli)?)?;
            match &report.metrics {
                Some(m) => println!(
                    "decoded {}/{} packets (psr {:.4}) in {} attempts",
                    m.successes, m.transmitted, m.psr, m.attempts
                ),
                None => println!(
                    "decoded {} packets in {} attempts",
                    report.results.len(),
                    report.attempts
                ),
            }
        }
        Command::Evaluate => {
            let path = cli
                .config
                .as_ref()
                .context("evaluate needs --config <recipe.toml>")?;
            let mut spec: ExperimentSpec = load_toml(path)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let report = commands::evaluate_cmd(&spec, &cli.out)?;
            for ((id, c), psr) in report.conditions.iter().zip(report.mean_psr()) {
                println!(
                    "{id} dE={:.2} tiles={} ec={} mode={} gaussian={} motion={} preset={} psr={psr:.4}",
                    c.delta_e00,
                    c.tiles,
                    c.ec_level.name(),
                    c.mode.name(),
                    c.gaussian,
                    c.motion_comp,
                    c.channel_preset
                );
            }
        }
        Command::SyncDemo => {
            for p in commands::sync_demo(&cli.out, &run_config(&cli)?, seed)? {
                println!(
                    "song {} frame {} captured {:.1} ms -> position {:.1} ms",
                    p.song_id, p.frame_num, p.capture_ts_ms, p.position_ms
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
