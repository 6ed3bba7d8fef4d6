use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use vlc_ofdm::sim::{emit_artifacts, run_campaign, CampaignKind, CampaignPlan, RunStatus, SimConfig};

#[derive(Parser)]
#[command(name = "vlcsim", version, about = "DCO-OFDM visible light link BER campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write CSV results plus a manifest.
    Run {
        /// TOML configuration file.
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Master seed, overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "fig7", value_parser = parse_campaign)]
        campaign: CampaignKind,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn parse_campaign(s: &str) -> Result<CampaignKind, String> {
    s.parse().map_err(|e: vlc_ofdm::Error| e.to_string())
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, campaign: CampaignKind, jobs: Option<usize>) -> Result<RunStatus> {
    let mut cfg = SimConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    let plan = CampaignPlan::new(&cfg, campaign)?;
    info!("{campaign}: {} points, seed {}", plan.points.len(), cfg.seed);
    let result = run_campaign(&plan, jobs)?;
    let censored = result.records().iter().filter(|r| r.censored).count();
    let (status, manifest) = emit_artifacts(&result, &out)?;
    match status {
        RunStatus::Ok => println!(
            "{campaign}: {} points ({censored} censored), manifest {}",
            result.outcomes.len(),
            manifest.display()
        ),
        RunStatus::NoData => println!("{campaign}: no data, manifest {}", manifest.display()),
    }
    Ok(status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let Command::Run { config, out, seed, campaign, jobs } = cli.command;
    match run(config, out, seed, campaign, jobs) {
        Ok(RunStatus::Ok) => ExitCode::SUCCESS,
        Ok(RunStatus::NoData) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
