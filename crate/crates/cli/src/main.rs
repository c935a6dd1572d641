//! `fdp`: scenario runner for f-DP filter accounting.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(name = "fdp", version, about = "Privacy filter scenarios with trade-off functions and privacy profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key of randomized scenarios.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Adaptive three-step composition that breaks the f-DP filter.
    Counterexample(Common),
    /// Relative errors of the PLRV moment approximations.
    Moments {
        #[command(flatten)]
        common: Common,
        /// 0 for small sampling rates, 1 for rates near one.
        #[arg(long)]
        regime: Option<u8>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Approximate GDP filter against RDP accounting on one schedule.
    CompareFilters(Common),
    /// Tensor product of factors and the f-DP filter decision against a budget.
    Compose(Common),
    /// Runs the approximate GDP accountant on a synthetic schedule.
    AccountantRun(Common),
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn run(cli: Cli) -> Result<bool> {
    let (common, overrides): (&Common, Vec<(&str, String)>) = match &cli.command {
        Command::Moments { common, regime, q, sigma, mu } => {
            let mut o = Vec::new();
            if let Some(r) = regime {
                o.push(("regime", r.to_string()));
            }
            if !q.is_empty() {
                o.push(("q", join(q)));
            }
            if !sigma.is_empty() {
                o.push(("sigma", join(sigma)));
            }
            if let Some(m) = mu {
                o.push(("mu", m.to_string()));
            }
            (common, o)
        }
        Command::Counterexample(c) | Command::CompareFilters(c) | Command::Compose(c) | Command::AccountantRun(c) => {
            (c, Vec::new())
        }
    };
    let mut cfg = Config::load(common.config.as_deref())?;
    for (k, v) in overrides {
        cfg.set(k, v);
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", seed);
    }
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let out = common.out.as_path();
    match &cli.command {
        Command::Counterexample(_) => commands::counterexample(&cfg, out),
        Command::Moments { .. } => commands::moments(&cfg, out),
        Command::CompareFilters(_) => commands::compare_filters(&cfg, out),
        Command::Compose(_) => {
            if common.config.is_none() {
                anyhow::bail!("compose needs --config with `factors` and `budget`");
            }
            commands::compose(&cfg, out)
        }
        Command::AccountantRun(_) => commands::accountant_run(&cfg, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
