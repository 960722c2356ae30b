//! Command-line front end: configuration, theory grids, simulation runs,
//! comparison tables and the self-test.

pub mod cli;
pub mod compare;
pub mod config;
pub mod grid;
pub mod suites;

use std::path::{Path, PathBuf};

use crate::mc::run_experiment;
use crate::{Error, Result};
use compare::{compare, table_csv, CompareOptions, ComparisonRow};
use config::ExperimentConfig;
use grid::{file_label, simulation_grids, theory_grid, theory_points, Grid};
use suites::SuiteReport;

/// Config keys echoed into output headers. The worker count and output
/// directory are left out so file bytes do not depend on them.
fn echo(g: &mut Grid, cfg: &ExperimentConfig) {
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if k != "workers" && k != "out" {
                g.set(&format!("config.{k}"), v);
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Center-normalized density grid of `cfg.event`, written to
/// `theory_<event>.csv` in the output directory.
pub fn cmd_theory(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (points, spacing) = theory_points(cfg)?;
    let mut g = theory_grid(cfg, &points, spacing)?;
    echo(&mut g, cfg);
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(format!("theory_{}.csv", file_label(&cfg.event.to_string())));
    g.write(&path)?;
    Ok(path)
}

/// Tally grids, one `sim_<label>.csv` per tally label.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let spec = cfg.lattice()?;
    let tallies = run_experiment(&spec, cfg.n_samples, cfg.seed, cfg.workers)?;
    ensure_dir(&cfg.out_dir)?;
    let mut out = Vec::new();
    for (label, mut g) in simulation_grids(cfg, &spec, &tallies) {
        echo(&mut g, cfg);
        let path = cfg.out_dir.join(format!("sim_{}.csv", file_label(&label)));
        g.write(&path)?;
        out.push(path);
    }
    Ok(out)
}

/// Compare two grid files and write `compare_<a>_vs_<b>.csv` to `out_dir`.
pub fn cmd_compare(a: &Path, b: &Path, opts: &CompareOptions, out_dir: &Path) -> Result<(Vec<ComparisonRow>, PathBuf)> {
    let (ga, gb) = (Grid::read(a)?, Grid::read(b)?);
    let rows = compare(&ga, &gb, opts)?;
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let meta = vec![
        ("schema".to_string(), grid::SCHEMA.to_string()),
        ("first".to_string(), a.display().to_string()),
        ("second".to_string(), b.display().to_string()),
        ("normalization".to_string(), "center".to_string()),
        ("min_count".to_string(), opts.min_count.to_string()),
        ("boundary_margin".to_string(), compare::BOUNDARY_MARGIN.to_string()),
    ];
    ensure_dir(out_dir)?;
    let path = out_dir.join(format!("compare_{}_vs_{}.csv", stem(a), stem(b)));
    std::fs::write(&path, table_csv(&rows, &meta)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok((rows, path))
}

/// Identity, residual and oracle suites with the negative control.
pub fn cmd_selftest() -> Vec<SuiteReport> {
    suites::quick_suites()
}
