//! Monte Carlo engine: hull walks for critical bond percolation in the
//! rectangle and site percolation in the hexagon, Swendsen-Wang sampling of
//! Ising FK clusters on both, and per-site pinch-point tallies.
//!
//! Randomness is counter based. A percolation sample `k` draws its cell
//! states from the ChaCha8 stream `k` of the run seed, in the order the
//! walks decide them. An Ising chain `c` uses stream `ISING_STREAM | c`.
//! Tallies are integer grids, so merging is exact and the result does not
//! depend on the number of workers.
//!
//! Lattice coordinates:
//!
//! * Rectangle `W x H`: primal sites `(i, j + 1/2)`, `0 <= i <= W`,
//!   `0 <= j < H`. The columns `i = 0` and `i = W` are wired; the dual rows
//!   `y = 0` and `y = H` are the free sides. The continuum rectangle is
//!   `[0, W] x [0, H]` scaled by `1 / H`. Tallies sit on bond midpoints.
//! * Hexagon of side `L`: axial sites `(i, j)` at `(i + j / 2, j sqrt(3) / 2)`
//!   with `max(|i|, |j|, |i + j|) <= L` free, and the ring at `L + 1` fixed:
//!   active on the sides `[1,2]`, `[3,4]`, `[5,6]` (corners included),
//!   vacant on the others. The continuum hexagon has side `L + 1/2`, is
//!   centred at the origin and has vertex 1 at bottom left.

mod ising;
mod lattice;
pub mod oracle;
mod run;
mod tally;
mod walk;

use std::fmt;

use crate::theory::FfbcEvent;
use crate::{Error, Result};

pub use ising::{sw_ising_sample, IsingState};
pub use run::{run_experiment, Sampler};
pub use tally::{tally, TallySet};
pub use walk::{
    fk_perimeter_walk, perc_hull_walk_hex, perc_hull_walk_rect, CellSource, Preset, Script, Stream, WalkState,
    WalkTrace,
};

/// Stream bit reserved for Ising chains.
pub const ISING_STREAM: u64 = 1 << 63;
/// Retained samples per Ising chain.
pub const CHAIN_LEN: u64 = 10_000;
/// Burn-in sweeps per unit of linear size.
pub const BURN_IN_PER_SIZE: u64 = 10;
/// Sweeps between retained samples.
pub const SWEEPS_PER_SAMPLE: u64 = 2;
/// Percolation samples handled by one task.
pub const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    SquareRect { width: usize, height: usize },
    TriangularHex { side: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    BondPerc,
    SitePerc,
    IsingFk,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::BondPerc => "bond_perc",
            Model::SitePerc => "site_perc",
            Model::IsingFk => "ising_fk",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s.trim() {
            "bond_perc" => Ok(Model::BondPerc),
            "site_perc" => Ok(Model::SitePerc),
            "ising_fk" => Ok(Model::IsingFk),
            _ => Err(Error::Config(format!("unknown model {s:?}"))),
        }
    }
}

/// Lattice, model, activation probability and wiring of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub model: Model,
    pub p_c: f64,
    pub wiring: FfbcEvent,
}

/// Critical activation probability of `model` on the lattice of `kind`.
pub fn critical_probability(kind: LatticeKind, model: Model) -> Result<f64> {
    match (kind, model) {
        (LatticeKind::SquareRect { .. }, Model::BondPerc) => Ok(0.5),
        (LatticeKind::TriangularHex { .. }, Model::SitePerc) => Ok(0.5),
        (LatticeKind::SquareRect { .. }, Model::IsingFk) => Ok(2f64.sqrt() / (1.0 + 2f64.sqrt())),
        (LatticeKind::TriangularHex { .. }, Model::IsingFk) => Ok((3f64.sqrt() - 1.0) / 3f64.sqrt()),
        _ => Err(Error::Config(format!("model {model} is not simulated on {kind:?}"))),
    }
}

impl LatticeSpec {
    /// Critical spec with the independent wiring.
    pub fn new(kind: LatticeKind, model: Model) -> Result<LatticeSpec> {
        let wiring = match kind {
            LatticeKind::SquareRect { .. } => FfbcEvent::rect_independent(),
            LatticeKind::TriangularHex { .. } => FfbcEvent::hex_independent(),
        };
        LatticeSpec::with_wiring(kind, model, wiring)
    }

    pub fn with_wiring(kind: LatticeKind, model: Model, wiring: FfbcEvent) -> Result<LatticeSpec> {
        let spec = LatticeSpec { kind, model, p_c: critical_probability(kind, model)?, wiring };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rect_percolation(width: usize, height: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(LatticeKind::SquareRect { width, height }, Model::BondPerc)
    }

    pub fn hex_percolation(side: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(LatticeKind::TriangularHex { side }, Model::SitePerc)
    }

    pub fn rect_ising(width: usize, height: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(LatticeKind::SquareRect { width, height }, Model::IsingFk)
    }

    pub fn hex_ising(side: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(LatticeKind::TriangularHex { side }, Model::IsingFk)
    }

    pub fn validate(&self) -> Result<()> {
        critical_probability(self.kind, self.model)?;
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(Error::Config(format!("activation probability {} outside [0, 1]", self.p_c)));
        }
        match self.kind {
            LatticeKind::SquareRect { width, height } => {
                if width < 1 || height < 1 {
                    return Err(Error::Config(format!("rectangle {width}x{height} has no interior")));
                }
                let ok = self.wiring.n_arcs == 2 && (self.wiring.index == 1 || self.model == Model::IsingFk);
                if !ok {
                    return Err(Error::Config(format!(
                        "rectangle {} supports the independent wiring (and the mutual one for ising_fk)",
                        self.model
                    )));
                }
            }
            LatticeKind::TriangularHex { side } => {
                if side < 1 {
                    return Err(Error::Config("hexagon side must be at least 1".into()));
                }
                if self.wiring != FfbcEvent::hex_independent() {
                    return Err(Error::Config("hexagon runs support the independent wiring only".into()));
                }
            }
        }
        Ok(())
    }

    /// Linear size used for burn-in and spacing: `H` or the hexagon side.
    pub fn linear_size(&self) -> usize {
        match self.kind {
            LatticeKind::SquareRect { height, .. } => height,
            LatticeKind::TriangularHex { side } => side,
        }
    }

    /// Lattice spacing in continuum units.
    pub fn spacing(&self) -> f64 {
        match self.kind {
            LatticeKind::SquareRect { height, .. } => 1.0 / height as f64,
            LatticeKind::TriangularHex { side } => 1.0 / (side as f64 + 0.5),
        }
    }

    /// Number of boundary arcs (walks per sample).
    pub fn n_arcs(&self) -> usize {
        match self.kind {
            LatticeKind::SquareRect { .. } => 2,
            LatticeKind::TriangularHex { .. } => 3,
        }
    }

    /// Tally grid `(width, height)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        lattice::GridMap::of(self).dims()
    }

    /// Continuum coordinates of tally cell `(ix, iy)`, `None` for grid points
    /// that no walk can tally.
    pub fn grid_point(&self, ix: usize, iy: usize) -> Option<(f64, f64)> {
        lattice::GridMap::of(self).point(ix, iy)
    }

    /// All tallied cells with their continuum coordinates, row-major.
    pub fn grid_points(&self) -> Vec<(usize, f64, f64)> {
        let map = lattice::GridMap::of(self);
        let (w, h) = map.dims();
        let mut out = Vec::new();
        for iy in 0..h {
            for ix in 0..w {
                if let Some((x, y)) = map.point(ix, iy) {
                    out.push((iy * w + ix, x, y));
                }
            }
        }
        out
    }

    /// Grid labels tallied for this polygon.
    pub fn labels(&self) -> Vec<String> {
        tally::labels(self.n_arcs())
    }
}

/// Walk start and end vertices, one pair per walk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Connectivity(pub Vec<(u8, u8)>);

impl Connectivity {
    /// Rectangle: the walk from vertex 1 ends at vertex 2.
    pub fn is_horizontal(&self) -> bool {
        self.0.first() == Some(&(1, 2))
    }

    /// Pairs ordered `(low, high)` and sorted.
    pub fn matching(&self) -> Vec<(u8, u8)> {
        let mut m: Vec<(u8, u8)> = self.0.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        m.sort_unstable();
        m
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in self.matching() {
            write!(f, "({a}{b})")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
