use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use invmm::MarketState;
use invmm_cli::commands;
use invmm_cli::{parse_config, RunConfig};

#[derive(Parser)]
#[command(name = "invmm", version, about = "Optimal market-making quotes under inventory risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` per line).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let text = fs::read_to_string(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        let mut cfg =
            parse_config(&text).with_context(|| format!("in {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(paths) = self.paths {
            anyhow::ensure!(paths >= 1, "--paths must be at least 1");
            cfg.n_paths = paths;
            anyhow::ensure!(cfg.path_index < paths as u64, "path_index must be below --paths");
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print quotes and value bounds for one state.
    Quotes {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Mid-price (defaults to `s0`).
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        q: i64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
    },
    /// Write one recorded trajectory per strategy on a shared path.
    Path {
        #[command(flatten)]
        common: Common,
    },
    /// Run the Monte Carlo ensemble and write the statistics table.
    Table {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the inventory ODE and dump the (t, q, v) grid.
    Ode {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Quotes { common, t, s, q, x } => {
            let cfg = common.load()?;
            let state = MarketState { t, s: s.unwrap_or(cfg.s0), q, x };
            print!("{}", commands::render_quotes(&cfg, &state)?);
        }
        Command::Path { common } => {
            let path = commands::cmd_path(&common.load()?)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Table { common } => {
            let cfg = common.load()?;
            for path in commands::cmd_table(&cfg, common.threads)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Ode { common } => {
            let path = commands::cmd_ode(&common.load()?)?;
            eprintln!("wrote {}", path.display());
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
