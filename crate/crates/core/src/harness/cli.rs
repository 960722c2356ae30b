//! Argument parsing and dispatch for the `pinch` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::compare::CompareOptions;
use super::config::{parse_slices, ExperimentConfig};
use super::grid::Grid;
use super::{cmd_compare, cmd_selftest, cmd_simulate, cmd_theory};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "pinch", about = "Pinch-point densities in polygons: theory grids, simulations, comparisons")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the normalized theory density on a grid.
    Theory,
    /// Run the Monte Carlo and write tally grids.
    Simulate,
    /// Tabulate slice errors of THEORY minus SIM.
    Compare {
        theory: PathBuf,
        sim: PathBuf,
        /// Comma-separated y values; defaults follow the config or polygon.
        #[arg(long)]
        slices: Option<String>,
        #[arg(long)]
        min_count: Option<u64>,
    },
    /// Run the identity, residual and oracle suites.
    Selftest,
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        Ok(cfg)
    }
}

/// Run a parsed command line, printing results; returns the exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let cfg = cli.experiment()?;
    match &cli.command {
        Command::Theory => println!("{}", cmd_theory(&cfg)?.display()),
        Command::Simulate => {
            for p in cmd_simulate(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Compare { theory, sim, slices, min_count } => {
            let slices = match slices {
                Some(s) => parse_slices(s)?,
                None if cli.config.is_some() => cfg.slices.clone(),
                None => match Grid::read(theory)?.meta("polygon") {
                    Some("hex") => ExperimentConfig::parse("polygon = hex")?.slices,
                    _ => ExperimentConfig::default().slices,
                },
            };
            let opts = CompareOptions { slices, min_count: min_count.unwrap_or(cfg.min_count) };
            let (rows, path) = cmd_compare(theory, sim, &opts, &cfg.out_dir)?;
            println!("{:>8} {:>8} {:>10} {:>10} {:>6}", "y_slice", "y_row", "avg_error", "std_dev", "bins");
            for r in rows {
                println!("{:>8.3} {:>8.4} {:>10.4} {:>10.4} {:>6}", r.y_slice, r.y_row, r.avg_error, r.std_dev, r.bins);
            }
            println!("{}", path.display());
        }
        Command::Selftest => {
            let reports = cmd_selftest();
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().any(|r| r.blocks()) {
                return Ok(1);
            }
        }
    }
    Ok(0)
}
