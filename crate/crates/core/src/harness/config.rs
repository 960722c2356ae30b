//! Flat `key = value` experiment configuration.

use std::path::PathBuf;

use crate::mc::{LatticeKind, LatticeSpec, Model};
use crate::params::ModelParams;
use crate::theory::{FfbcEvent, PinchEvent};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Polygon {
    /// Rectangle `[0, aspect] x [0, 1]`.
    Rect { aspect: f64 },
    /// Regular hexagon with alternate sides wired.
    HexRegular,
}

impl Polygon {
    pub fn n_arcs(&self) -> usize {
        match self {
            Polygon::Rect { .. } => 2,
            Polygon::HexRegular => 3,
        }
    }
}

/// Which `kappa`, and which lattice model simulates it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelChoice {
    Percolation,
    IsingFk,
    /// Theory only.
    Custom(f64),
}

impl ModelChoice {
    pub fn kappa(&self) -> f64 {
        match *self {
            ModelChoice::Percolation => 6.0,
            ModelChoice::IsingFk => 16.0 / 3.0,
            ModelChoice::Custom(k) => k,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelChoice::Percolation => "percolation".into(),
            ModelChoice::IsingFk => "ising_fk".into(),
            ModelChoice::Custom(k) => format!("custom({k})"),
        }
    }
}

/// Points at which `theory` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryPoints {
    /// Every lattice tally point at `resolution`.
    Lattice,
    /// Only the slice rows and the center block.
    Slices,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub polygon: Polygon,
    pub model: ModelChoice,
    pub event: PinchEvent,
    pub ffbc: FfbcEvent,
    /// Lattice height (rectangle) or side (hexagon).
    pub size: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub workers: usize,
    /// Lattice size whose tally points the theory grid uses.
    pub resolution: usize,
    pub theory_points: TheoryPoints,
    pub slices: Vec<f64>,
    /// Simulation bins with fewer counts are left out of comparisons.
    pub min_count: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            polygon: Polygon::Rect { aspect: 2.0 },
            model: ModelChoice::Percolation,
            event: PinchEvent::RectTwo,
            ffbc: FfbcEvent::rect_independent(),
            size: 100,
            n_samples: 10_000,
            seed: 1,
            workers: 1,
            resolution: 100,
            theory_points: TheoryPoints::Lattice,
            slices: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            min_count: 10,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_slices(v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num("slices", s.trim())).collect()
}

impl ExperimentConfig {
    /// Parse `key = value` lines; `#` starts a comment. Keys left out keep
    /// their defaults, except that the slices, event and wiring follow the
    /// polygon when not given.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut kv = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let known = [
            "polygon",
            "aspect",
            "model",
            "kappa",
            "event",
            "ffbc",
            "size",
            "samples",
            "seed",
            "workers",
            "resolution",
            "theory_points",
            "slices",
            "min_count",
            "out",
        ];
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let aspect: f64 = get("aspect").map(|v| parse_num("aspect", v)).transpose()?.unwrap_or(2.0);
        cfg.polygon = match get("polygon").unwrap_or("rect") {
            "rect" => Polygon::Rect { aspect },
            "hex" => Polygon::HexRegular,
            other => return Err(Error::Config(format!("polygon must be rect or hex, got {other:?}"))),
        };
        cfg.model = match get("model").unwrap_or("percolation") {
            "percolation" => ModelChoice::Percolation,
            "ising_fk" => ModelChoice::IsingFk,
            "custom" => {
                let k = get("kappa").ok_or_else(|| Error::Config("model = custom needs kappa".into()))?;
                ModelChoice::Custom(parse_num("kappa", k)?)
            }
            other => {
                return Err(Error::Config(format!("model must be percolation, ising_fk or custom, got {other:?}")))
            }
        };
        let n_arcs = cfg.polygon.n_arcs();
        cfg.event = match get("event") {
            Some(v) => v.parse()?,
            None if n_arcs == 2 => PinchEvent::RectTwo,
            None => PinchEvent::HexOneCombo,
        };
        cfg.ffbc = match get("ffbc") {
            Some(v) => FfbcEvent::new(n_arcs, parse_num("ffbc", v)?)?,
            None if n_arcs == 2 => FfbcEvent::rect_independent(),
            None => FfbcEvent::hex_independent(),
        };
        if let Some(v) = get("size") {
            cfg.size = parse_num("size", v)?;
        }
        cfg.resolution = get("resolution").map(|v| parse_num("resolution", v)).transpose()?.unwrap_or(cfg.size);
        if let Some(v) = get("samples") {
            cfg.n_samples = parse_num("samples", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = get("workers") {
            cfg.workers = parse_num("workers", v)?;
        }
        cfg.theory_points = match get("theory_points").unwrap_or("lattice") {
            "lattice" => TheoryPoints::Lattice,
            "slices" => TheoryPoints::Slices,
            other => return Err(Error::Config(format!("theory_points must be lattice or slices, got {other:?}"))),
        };
        cfg.slices = match get("slices") {
            Some(v) => parse_slices(v)?,
            None if n_arcs == 2 => vec![0.1, 0.2, 0.3, 0.4, 0.5],
            None => vec![-0.69, -0.52, -0.31, -0.03],
        };
        if let Some(v) = get("min_count") {
            cfg.min_count = parse_num("min_count", v)?;
        }
        if let Some(v) = get("out") {
            cfg.out_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    /// `key = value` text that parses back to this configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        match self.polygon {
            Polygon::Rect { aspect } => {
                put("polygon", "rect".into());
                put("aspect", aspect.to_string());
            }
            Polygon::HexRegular => put("polygon", "hex".into()),
        }
        match self.model {
            ModelChoice::Custom(k) => {
                put("model", "custom".into());
                put("kappa", k.to_string());
            }
            m => put("model", m.name()),
        }
        put("event", self.event.to_string());
        put("ffbc", self.ffbc.index.to_string());
        put("size", self.size.to_string());
        put("samples", self.n_samples.to_string());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        put("resolution", self.resolution.to_string());
        put("theory_points", if self.theory_points == TheoryPoints::Lattice { "lattice" } else { "slices" }.into());
        put("slices", self.slices.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
        put("min_count", self.min_count.to_string());
        put("out", self.out_dir.display().to_string());
        out
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::from_kappa(self.model.kappa())
    }

    pub fn validate(&self) -> Result<()> {
        let n_arcs = self.polygon.n_arcs();
        if self.event.n_arcs() != n_arcs {
            return Err(Error::Config(format!("event {} does not belong to this polygon", self.event)));
        }
        if self.ffbc.n_arcs != n_arcs {
            return Err(Error::Config("wiring does not belong to this polygon".into()));
        }
        if let Polygon::Rect { aspect } = self.polygon {
            if !(aspect > 0.0 && aspect.is_finite()) {
                return Err(Error::Config(format!("aspect {aspect} must be positive")));
            }
        }
        if self.size == 0 || self.resolution == 0 {
            return Err(Error::Config("size and resolution must be positive".into()));
        }
        self.params()?;
        Ok(())
    }

    /// Lattice of linear size `size` (height or side) for this polygon.
    pub fn lattice_at(&self, size: usize) -> Result<LatticeSpec> {
        let model = match (self.model, self.polygon) {
            (ModelChoice::Percolation, Polygon::Rect { .. }) => Model::BondPerc,
            (ModelChoice::Percolation, Polygon::HexRegular) => Model::SitePerc,
            (ModelChoice::IsingFk, _) => Model::IsingFk,
            (ModelChoice::Custom(k), _) => {
                return Err(Error::Config(format!("no lattice model simulates kappa = {k}")));
            }
        };
        let kind = match self.polygon {
            Polygon::Rect { aspect } => {
                let w = aspect * size as f64;
                if (w - w.round()).abs() > 1e-9 {
                    return Err(Error::Config(format!("aspect {aspect} times height {size} is not a whole width")));
                }
                LatticeKind::SquareRect { width: w.round() as usize, height: size }
            }
            Polygon::HexRegular => LatticeKind::TriangularHex { side: size },
        };
        LatticeSpec::with_wiring(kind, model, self.ffbc)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        self.lattice_at(self.size)
    }
}
