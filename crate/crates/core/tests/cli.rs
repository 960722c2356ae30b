//! End-to-end runs of the `pinch` binary and of the file-level commands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pinch::harness::compare::CompareOptions;
use pinch::harness::config::ExperimentConfig;
use pinch::harness::grid::{Density, Grid};
use pinch::harness::{cmd_compare, cmd_simulate, cmd_theory};
use pinch::params::ModelParams;
use pinch::theory::{FfbcEvent, PinchEvent};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pinch-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn pinch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinch")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn read_all(paths: &[PathBuf]) -> Vec<(String, Vec<u8>)> {
    paths.iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap())).collect()
}

#[test]
fn zero_samples_give_valid_empty_grids() {
    let dir = scratch("zero");
    let cfg = ExperimentConfig::parse(&format!("size = 6\nsamples = 0\nout = {}", dir.display())).unwrap();
    let files = cmd_simulate(&cfg).unwrap();
    assert_eq!(files.len(), cfg.lattice().unwrap().labels().len());
    let n_points = cfg.lattice().unwrap().grid_points().len();
    for f in files {
        let g = Grid::read(&f).unwrap();
        assert_eq!(g.meta("samples"), Some("0"));
        assert_eq!(g.meta("kind"), Some("simulation"));
        assert!(g.meta("p_c").is_some() && g.meta("seed").is_some());
        assert_eq!(g.points.len(), n_points);
        assert!(g.points.iter().all(|p| p.value == 0.0));
    }
}

#[test]
fn rerun_with_same_seed_gives_identical_bytes() {
    for text in [
        "size = 10\nsamples = 300",
        "polygon = hex\nsize = 6\nsamples = 300",
        "model = ising_fk\nsize = 4\nsamples = 60",
    ] {
        let (a, b) = (scratch("rerun-a"), scratch("rerun-b"));
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        cfg.out_dir = a.clone();
        let first = read_all(&cmd_simulate(&cfg).unwrap());
        cfg.out_dir = b.clone();
        cfg.workers = 3;
        let second = read_all(&cmd_simulate(&cfg).unwrap());
        assert_eq!(first, second, "{text}");
        cfg.seed += 1;
        let third = read_all(&cmd_simulate(&cfg).unwrap());
        assert_ne!(first, third, "{text}");
    }
}

#[test]
fn theory_center_is_exactly_one() {
    let dir = scratch("center");
    let cfg =
        ExperimentConfig::parse(&format!("model = ising_fk\nevent = 1234\nsize = 8\nout = {}", dir.display())).unwrap();
    let g = Grid::read(&cmd_theory(&cfg).unwrap()).unwrap();
    let c = g.points.iter().find(|p| p.x == 1.0 && p.y == 0.5).unwrap();
    assert_eq!(c.value, 1.0);
    assert_eq!(g.meta("config.model"), Some("ising_fk"));
    assert_eq!(g.meta("unevaluable"), Some("0"));
}

#[test]
fn hexagon_three_pinch_has_sixfold_symmetry() {
    let p = ModelParams::from_kappa(6.0).unwrap();
    let cfg = ExperimentConfig::parse("polygon = hex").unwrap();
    let d = Density::new(cfg.polygon, PinchEvent::HexThree, FfbcEvent::hex_independent(), &p).unwrap();
    let mut worst = 0f64;
    for &(x, y) in &[(0.1, 0.05), (0.3, -0.2), (-0.45, 0.1), (0.0, 0.6), (0.2, 0.4)] {
        let base = d.at(x, y).unwrap();
        for k in 1..6 {
            let t = std::f64::consts::PI * k as f64 / 3.0;
            let v = d.at(x * t.cos() - y * t.sin(), x * t.sin() + y * t.cos()).unwrap();
            worst = worst.max((v - base).abs() / base);
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn one_pinch_profile_peaks_toward_the_first_vertices() {
    let p = ModelParams::from_kappa(6.0).unwrap();
    let cfg = ExperimentConfig::default();
    let d = Density::new(cfg.polygon, PinchEvent::RectOne(1), FfbcEvent::rect_independent(), &p).unwrap();
    // near the bottom edge the maxima sit toward the two bottom corners
    let profile: Vec<f64> = (1..40).map(|i| d.at(i as f64 * 0.05, 0.1).unwrap()).collect();
    let top = profile.iter().cloned().fold(0.0, f64::max);
    let arg = profile.iter().position(|&v| v == top).unwrap();
    assert!(arg < 10 || arg > 28, "{profile:?}");
    assert!(profile[19] < top);
    assert!((profile[3] - profile[35]).abs() < 1e-9 * top);
    assert!(d.at(0.2, 0.1).unwrap() > d.at(0.2, 0.9).unwrap());
}

#[test]
fn desk_run_two_pinch_peaks_at_the_center() {
    let cfg = ExperimentConfig::parse("size = 20\nsamples = 20000").unwrap();
    let spec = cfg.lattice().unwrap();
    let t = pinch::mc::run_experiment(&spec, cfg.n_samples, cfg.seed, 1).unwrap();
    let grid = t.grid("1234").unwrap();
    let (mut center, mut edge) = ((0u64, 0u64), (0u64, 0u64));
    for (i, x, y) in spec.grid_points() {
        if (x - 1.0).abs() < 0.2 && (y - 0.5).abs() < 0.2 {
            center = (center.0 + grid[i], center.1 + 1);
        } else if x < 0.3 || x > 1.7 {
            edge = (edge.0 + grid[i], edge.1 + 1);
        }
    }
    let (c, e) = (center.0 as f64 / center.1 as f64, edge.0 as f64 / edge.1 as f64);
    assert!(c > 1.5 * e, "center {c}, edges {e}");
}

#[test]
fn compare_files_and_reject_mismatches() {
    let dir = scratch("compare");
    let cfg = ExperimentConfig::parse(&format!("size = 10\nout = {}", dir.display())).unwrap();
    let th = cmd_theory(&cfg).unwrap();
    // at height 10 the y = 0.1 row lies inside the boundary margin
    let opts = CompareOptions { slices: vec![0.1], min_count: 0 };
    assert!(cmd_compare(&th, &th, &opts, &dir).is_err());
    let opts = CompareOptions { slices: vec![0.3, 0.4, 0.5], min_count: 0 };
    let (rows, table) = cmd_compare(&th, &th, &opts, &dir).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.avg_error == 0.0 && r.std_dev == 0.0));
    assert!(std::fs::read_to_string(table).unwrap().contains("y_slice,y_row,avg_error,std_dev,bins"));
    let other = ExperimentConfig { size: 12, resolution: 12, out_dir: dir.join("b"), ..cfg };
    let th2 = cmd_theory(&other).unwrap();
    assert!(cmd_compare(&th, &th2, &opts, &dir).is_err());
}

#[test]
fn binary_round_trip() {
    let dir = scratch("binary");
    let out = dir.display().to_string();
    let cfg = write_config(&dir, "size = 10\nsamples = 2000\n");
    let cfg = cfg.to_str().unwrap();
    let th = pinch(&["theory", "--config", cfg, "--out", &out]);
    assert!(th.status.success(), "{}", String::from_utf8_lossy(&th.stderr));
    let sim = pinch(&["simulate", "--config", cfg, "--seed", "4", "--workers", "2", "--out", &out]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let listed = String::from_utf8_lossy(&sim.stdout).into_owned();
    assert!(listed.contains("sim_1234.csv"), "{listed}");
    let theory = dir.join("theory_1234.csv");
    let simfile = dir.join("sim_1234.csv");
    assert_eq!(Grid::read(&simfile).unwrap().meta("seed"), Some("4"));
    let cmp = pinch(&[
        "compare",
        theory.to_str().unwrap(),
        simfile.to_str().unwrap(),
        "--slices",
        "0.3,0.5",
        "--min-count",
        "1",
        "--out",
        &out,
    ]);
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    let table = String::from_utf8_lossy(&cmp.stdout).into_owned();
    assert_eq!(table.lines().filter(|l| l.trim_start().starts_with("0.")).count(), 2, "{table}");
}

#[test]
fn binary_reports_bad_input() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, "size = 10\ncolour = blue\n");
    let r = pinch(&["theory", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("colour"));
    let r = pinch(&["compare", "missing-a.csv", "missing-b.csv"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!pinch(&["frobnicate"]).status.success());
}

#[test]
fn selftest_reports_every_suite() {
    let r = pinch(&["selftest"]);
    let text = String::from_utf8_lossy(&r.stdout).into_owned();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 8, "{text}");
    assert!(text.contains("PASS negative control"), "{text}");
    assert!(text.contains("PASS block equivalence"), "{text}");
    assert!(r.status.success(), "{text}");
}
