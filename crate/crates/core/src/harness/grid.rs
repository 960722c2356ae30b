//! Point grids in polygon coordinates and their CSV form: `#`-prefixed
//! `key=value` metadata, a `x,y,value` header, then one row per point.
//! Rectangles span `[0, R] x [0, 1]`; hexagons have side 1 and are centred
//! at the origin with vertex 1 at bottom left. `nan` marks unevaluable
//! points.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::compare::{center, in_center_block, nearest_rows};
use super::config::{ExperimentConfig, ModelChoice, Polygon, TheoryPoints};
use crate::mc::{LatticeSpec, TallySet};
use crate::params::ModelParams;
use crate::scmap::{rect_from_aspect, HexGeometry};
use crate::theory::{FfbcEvent, HexDensity, PinchEvent, RectDensity};
use crate::{Error, Result, C64};

pub const SCHEMA: &str = "1";

#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Points with metadata. Equality is bitwise on the numbers.
#[derive(Debug, Clone, Default)]
pub struct Grid {
    pub meta: BTreeMap<String, String>,
    pub points: Vec<GridPoint>,
}

impl PartialEq for Grid {
    fn eq(&self, o: &Grid) -> bool {
        self.meta == o.meta
            && self.points.len() == o.points.len()
            && self.points.iter().zip(&o.points).all(|(a, b)| {
                a.x.to_bits() == b.x.to_bits()
                    && a.y.to_bits() == b.y.to_bits()
                    && a.value.to_bits() == b.value.to_bits()
            })
    }
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

impl Grid {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(|s| s.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        let v = self.meta(key).ok_or_else(|| Error::Config(format!("grid has no {key:?} entry")))?;
        v.parse().map_err(|_| Error::Config(format!("grid entry {key} = {v:?} is not a number")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema={SCHEMA}").unwrap();
        for (k, v) in &self.meta {
            if k != "schema" {
                writeln!(out, "# {k}={v}").unwrap();
            }
        }
        out.push_str("x,y,value\n");
        for p in &self.points {
            writeln!(out, "{},{},{}", number(p.x), number(p.y), number(p.value)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Grid> {
        let mut g = Grid::default();
        let mut header = false;
        for (n, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::Config(format!("line {}: {what}: {line:?}", n + 1));
            if let Some(m) = line.strip_prefix('#') {
                let (k, v) = m.trim_start().split_once('=').ok_or_else(|| bad("metadata without '='"))?;
                g.meta.insert(k.to_string(), v.to_string());
                continue;
            }
            if !header {
                if line.trim() != "x,y,value" {
                    return Err(bad("expected the x,y,value header"));
                }
                header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad("expected three fields"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
            g.points.push(GridPoint { x: num(f[0])?, y: num(f[1])?, value: num(f[2])? });
        }
        if g.meta("schema") != Some(SCHEMA) {
            return Err(Error::Config(format!("unsupported grid schema {:?}", g.meta("schema"))));
        }
        g.meta.remove("schema");
        Ok(g)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Grid> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Grid::parse(&text)
    }
}

/// File-name form of an event or tally label.
pub fn file_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect()
}

fn describe_polygon(g: &mut Grid, polygon: Polygon, spacing: f64) {
    match polygon {
        Polygon::Rect { aspect } => {
            g.set("polygon", "rect");
            g.set("aspect", aspect);
        }
        Polygon::HexRegular => g.set("polygon", "hex"),
    }
    g.set("spacing", spacing);
}

/// Density evaluator in grid coordinates.
#[derive(Debug, Clone)]
pub enum Density {
    Rect(RectDensity),
    Hex(HexDensity),
}

impl Density {
    pub fn new(polygon: Polygon, event: PinchEvent, ffbc: FfbcEvent, params: &ModelParams) -> Result<Density> {
        Ok(match polygon {
            Polygon::Rect { aspect } => {
                Density::Rect(RectDensity::new(event, ffbc, rect_from_aspect(aspect)?, params)?)
            }
            Polygon::HexRegular => Density::Hex(HexDensity::new(event, ffbc, HexGeometry::regular()?, params)?),
        })
    }

    pub fn at(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Density::Rect(d) => d.density(C64::new(x, y)),
            Density::Hex(d) => d.density(C64::new(x, y) + d.geo.centroid()),
        }
    }

    /// Value at the nominal polygon center, through the same path as
    /// [`Density::at`] so that a grid point there normalizes to exactly 1.
    pub fn center(&self, polygon: Polygon) -> Result<f64> {
        let (cx, cy) = center(polygon);
        match self {
            Density::Rect(_) => self.at(cx, cy),
            Density::Hex(d) => self.at(cx, cy).or_else(|_| d.density_at_preimage(d.geo.center_preimage)),
        }
    }
}

/// Lattice whose tally points the theory grid of `cfg` uses.
pub fn geometry_lattice(cfg: &ExperimentConfig, size: usize) -> Result<LatticeSpec> {
    let mut c = cfg.clone();
    if let ModelChoice::Custom(_) = c.model {
        c.model = ModelChoice::Percolation;
    }
    c.lattice_at(size)
}

/// Theory evaluation points: the tally points at `cfg.resolution`, or only
/// those on slice rows and in the center block.
pub fn theory_points(cfg: &ExperimentConfig) -> Result<(Vec<(f64, f64)>, f64)> {
    let spec = geometry_lattice(cfg, cfg.resolution)?;
    let spacing = spec.spacing();
    let all: Vec<(f64, f64)> = spec.grid_points().into_iter().map(|(_, x, y)| (x, y)).collect();
    if cfg.theory_points == TheoryPoints::Lattice {
        return Ok((all, spacing));
    }
    let ys: Vec<f64> = all.iter().map(|p| p.1).collect();
    let rows = nearest_rows(&ys, &cfg.slices);
    let keep = all
        .into_iter()
        .filter(|&(x, y)| rows.contains(&y) || in_center_block(cfg.polygon, spacing, x, y))
        .collect();
    Ok((keep, spacing))
}

/// Center-normalized density of `cfg.event` at `points`, evaluated in
/// parallel on `workers` threads.
pub fn theory_grid(cfg: &ExperimentConfig, points: &[(f64, f64)], spacing: f64) -> Result<Grid> {
    let params = cfg.params()?;
    let density = Density::new(cfg.polygon, cfg.event, cfg.ffbc, &params)?;
    let center = density.center(cfg.polygon)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let values: Vec<f64> =
        pool.install(|| points.par_iter().map(|&(x, y)| density.at(x, y).map_or(f64::NAN, |v| v / center)).collect());
    let mut g = Grid::default();
    g.set("kind", "theory");
    describe_polygon(&mut g, cfg.polygon, spacing);
    g.set("kappa", params.kappa);
    g.set("event", cfg.event);
    g.set("ffbc", cfg.ffbc.index);
    g.set("resolution", cfg.resolution);
    g.set("normalization", "center");
    g.set("unevaluable", values.iter().filter(|v| v.is_nan()).count());
    g.points = points.iter().zip(values).map(|(&(x, y), value)| GridPoint { x, y, value }).collect();
    Ok(g)
}

/// One integer grid per tally label, with run metadata.
pub fn simulation_grids(cfg: &ExperimentConfig, spec: &LatticeSpec, tallies: &TallySet) -> Vec<(String, Grid)> {
    let pts = spec.grid_points();
    let mut out = Vec::new();
    for (label, counts) in &tallies.grids {
        let mut g = Grid::default();
        g.set("kind", "simulation");
        describe_polygon(&mut g, cfg.polygon, spec.spacing());
        g.set("model", spec.model);
        g.set("p_c", spec.p_c);
        g.set("size", spec.linear_size());
        g.set("ffbc", spec.wiring.index);
        g.set("seed", cfg.seed);
        g.set("samples", tallies.sample_count);
        g.set("label", label);
        for (conn, n) in &tallies.connectivity {
            g.set(&format!("connectivity{conn}"), n);
        }
        if let Some(tau) = tallies.mean_autocorrelation() {
            g.set("tau_int", tau);
        }
        g.points = pts.iter().map(|&(i, x, y)| GridPoint { x, y, value: counts[i] as f64 }).collect();
        out.push((label.clone(), g));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trips(pts in prop::collection::vec((any::<f64>(), -1e6f64..1e6, any::<f64>()), 0..40)) {
            let mut g = Grid::default();
            g.set("kind", "theory");
            g.set("event", "12:34");
            g.points = pts.iter().map(|&(x, y, value)| GridPoint { x, y, value }).collect();
            let back = Grid::parse(&g.to_csv()).unwrap();
            // NaN payloads are not preserved, only NaN-ness
            prop_assert_eq!(back.points.len(), g.points.len());
            for (a, b) in back.points.iter().zip(&g.points) {
                prop_assert!(a.x.to_bits() == b.x.to_bits() || (a.x.is_nan() && b.x.is_nan()));
                prop_assert!(a.value.to_bits() == b.value.to_bits() || (a.value.is_nan() && b.value.is_nan()));
                prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
            }
            prop_assert_eq!(&back.meta, &g.meta);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(Grid::parse("x,y,value\n1,2,3\n").is_err());
        assert!(Grid::parse("# schema=1\n1,2,3\n").is_err());
        assert!(Grid::parse("# schema=1\nx,y,value\n1,2\n").is_err());
        assert!(Grid::parse("# schema=1\nx,y,value\n1,2,q\n").is_err());
        assert!(Grid::parse("# schema=9\nx,y,value\n").is_err());
    }

    #[test]
    fn rect_center_value_is_one() {
        let cfg = ExperimentConfig::parse("model = ising_fk\nevent = 1234\nsize = 4").unwrap();
        let g = theory_grid(&cfg, &[(1.0, 0.5), (0.5, 0.25)], 0.25).unwrap();
        assert_eq!(g.points[0].value, 1.0);
        assert!(g.points[1].value > 0.0 && g.points[1].value < 1.0);
    }

    #[test]
    fn points_outside_are_marked() {
        let cfg = ExperimentConfig::parse("polygon = hex\nevent = 123456\nsize = 4").unwrap();
        let g = theory_grid(&cfg, &[(0.0, 0.0), (0.0, 0.9)], 0.2).unwrap();
        assert!((g.points[0].value - 1.0).abs() < 1e-9);
        assert!(g.points[1].value.is_nan());
        assert_eq!(g.meta("unevaluable"), Some("1"));
    }

    #[test]
    fn slice_points_cover_rows_and_block() {
        let cfg = ExperimentConfig::parse("size = 40\ntheory_points = slices\nslices = 0.1,0.5").unwrap();
        let (pts, spacing) = theory_points(&cfg).unwrap();
        assert_eq!(spacing, 1.0 / 40.0);
        let mut rows: Vec<f64> = pts.iter().map(|p| p.1).filter(|y| (y - 0.1).abs() < 0.02).collect();
        rows.dedup();
        assert!(rows.iter().all(|&y| y == rows[0]));
        assert!(pts.iter().any(|&(x, y)| x == 1.0 && (y - 0.5).abs() < 0.02));
    }
}
