//! Hull walks. Bond walks run on flags `(site, direction)` of a planar
//! lattice; site walks run between active and vacant triangular sites.
//! Each undecided cell is decided on first contact and never again within
//! a sample.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lattice::{BondLattice, SiteLattice, ACTIVE, FREE, NONE, OUTSIDE, VACANT};
use super::{Connectivity, LatticeKind, LatticeSpec, Model};
use crate::{Error, Result};

/// Supplies the state of undecided cells; `None` aborts the walk.
pub trait CellSource {
    fn decide(&mut self, cell: usize) -> Option<bool>;
}

/// Bernoulli cells drawn in decision order from one ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    threshold: u64,
    fair: bool,
    bits: u64,
    left: u32,
}

impl Stream {
    pub fn new(seed: u64, stream: u64, p: f64) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Stream { rng, threshold: threshold(p), fair: p == 0.5, bits: 0, left: 0 }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    #[inline]
    pub fn bernoulli(&mut self) -> bool {
        if self.fair {
            if self.left == 0 {
                self.bits = self.rng.next_u64();
                self.left = 64;
            }
            let b = self.bits & 1 == 1;
            self.bits >>= 1;
            self.left -= 1;
            b
        } else {
            self.rng.next_u64() < self.threshold
        }
    }
}

/// `P(u < t) = p` for `u` uniform on 64 bits; `p = 1` saturates.
pub(crate) fn threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * 2f64.powi(64)) as u64
    }
}

impl CellSource for Stream {
    #[inline]
    fn decide(&mut self, _cell: usize) -> Option<bool> {
        Some(self.bernoulli())
    }
}

/// A complete configuration indexed by cell.
#[derive(Debug, Clone, Copy)]
pub struct Preset<'a>(pub &'a [bool]);

impl CellSource for Preset<'_> {
    fn decide(&mut self, cell: usize) -> Option<bool> {
        Some(self.0[cell])
    }
}

/// Decisions read in order from a finite script.
#[derive(Debug, Clone, Default)]
pub struct Script {
    pub bits: Vec<bool>,
    pub used: usize,
}

impl CellSource for Script {
    fn decide(&mut self, _cell: usize) -> Option<bool> {
        let b = self.bits.get(self.used).copied();
        if b.is_some() {
            self.used += 1;
        }
        b
    }
}

/// Cells and sites met by one walk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkTrace {
    pub start: u8,
    pub end: u8,
    /// Tally cells, each once, in order of first visit.
    pub cells: Vec<u32>,
    /// Inner arc: cluster sites on the walk, each once.
    pub inner: Vec<u32>,
    /// Outer arc: vacant sites on the walk (site walks only).
    pub outer: Vec<u32>,
}

/// Per-sample stamps: `mask[i]` is valid when `stamp[i] == now`.
#[derive(Debug, Clone)]
pub(crate) struct Marks {
    stamp: Vec<u32>,
    mask: Vec<u8>,
}

impl Marks {
    fn new(n: usize) -> Marks {
        Marks { stamp: vec![0; n], mask: vec![0; n] }
    }

    #[inline]
    fn mark(&mut self, i: usize, bit: u8, now: u32) -> bool {
        if self.stamp[i] != now {
            self.stamp[i] = now;
            self.mask[i] = 0;
        }
        let fresh = self.mask[i] & bit == 0;
        self.mask[i] |= bit;
        fresh
    }

    fn clear(&mut self) {
        self.stamp.iter_mut().for_each(|s| *s = 0);
    }
}

/// Walk bookkeeping reused across samples: the decided-cell store and the
/// per-walk traces.
#[derive(Debug, Clone)]
pub struct WalkState {
    decided: Vec<u32>,
    open: Vec<bool>,
    cells: Marks,
    sites: Marks,
    now: u32,
    /// Decisions taken in the current sample.
    pub decisions: u64,
    pub traces: Vec<WalkTrace>,
    /// Every flag examined, when enabled.
    pub(crate) log: Option<Vec<(u32, u8)>>,
}

impl WalkState {
    pub fn new(n_cells: usize, n_grid: usize, n_sites: usize) -> WalkState {
        WalkState {
            decided: vec![0; n_cells],
            open: vec![false; n_cells],
            cells: Marks::new(n_grid),
            sites: Marks::new(n_sites),
            now: 0,
            decisions: 0,
            traces: Vec::new(),
            log: None,
        }
    }

    /// Forget all decisions and traces.
    pub fn begin(&mut self) {
        if self.now == u32::MAX {
            self.decided.iter_mut().for_each(|s| *s = 0);
            self.cells.clear();
            self.sites.clear();
            self.now = 0;
        }
        self.now += 1;
        self.decisions = 0;
        self.traces.clear();
        if let Some(l) = &mut self.log {
            l.clear();
        }
    }

    /// State of `cell`, decided now if new.
    #[inline]
    pub fn cell<S: CellSource>(&mut self, cell: usize, src: &mut S) -> Option<bool> {
        if self.decided[cell] == self.now {
            return Some(self.open[cell]);
        }
        let v = src.decide(cell)?;
        self.decided[cell] = self.now;
        self.open[cell] = v;
        self.decisions += 1;
        Some(v)
    }

    pub fn is_decided(&self, cell: usize) -> bool {
        self.decided[cell] == self.now
    }

    #[inline]
    fn visit_cell(&mut self, walk: usize, cell: u32) {
        if cell != NONE && self.cells.mark(cell as usize, 1 << walk, self.now) {
            self.traces[walk].cells.push(cell);
        }
    }

    #[inline]
    fn visit_site(&mut self, walk: usize, site: usize, inner: bool) {
        if self.sites.mark(site, 1 << walk, self.now) {
            let t = &mut self.traces[walk];
            if inner {
                t.inner.push(site as u32);
            } else {
                t.outer.push(site as u32);
            }
        }
    }
}

/// Flag walk from `start` until it leaves through a corner. Open bonds are
/// crossed, closed ones rotate the flag by the lattice chirality.
pub(crate) fn bond_walk<S: CellSource>(
    lat: &BondLattice,
    start: super::lattice::Start,
    walk: usize,
    state: &mut WalkState,
    src: &mut S,
) -> Option<u8> {
    let deg = lat.deg();
    let half = deg / 2;
    let chi = lat.chirality;
    let (mut s, mut d) = (start.site, start.dir);
    state.traces.push(WalkTrace { start: start.vertex, ..Default::default() });
    state.visit_site(walk, s, true);
    let limit = 2 * lat.n_bond_slots() * deg + 16;
    for _ in 0..limit {
        if let Some(l) = &mut state.log {
            l.push((s as u32, d as u8));
        }
        let u = match lat.neighbor(s, d) {
            Some(u) => u,
            None => {
                if let Some(v) = lat.terminal(s, d) {
                    state.traces[walk].end = v;
                    return Some(v);
                }
                d = (d + chi) % deg;
                continue;
            }
        };
        let b = lat.bond(s, d);
        let open = if lat.forced(s, u) { true } else { state.cell(b, src)? };
        state.visit_cell(walk, lat.bond_cell[b]);
        if open {
            s = u;
            d = (d + half + chi) % deg;
            state.visit_site(walk, s, true);
        } else {
            d = (d + chi) % deg;
        }
    }
    panic!("hull walk from vertex {} did not terminate", start.vertex);
}

/// Site walk between active (right) and vacant (left) sites, starting from
/// the ring corner `start.site` whose vacant ring neighbour lies in
/// direction `start.dir`.
pub(crate) fn site_walk<S: CellSource>(
    lat: &SiteLattice,
    start: super::lattice::Start,
    walk: usize,
    state: &mut WalkState,
    src: &mut S,
) -> Option<u8> {
    let (mut a, mut k) = (start.site, start.dir);
    state.traces.push(WalkTrace { start: start.vertex, ..Default::default() });
    state.visit_site(walk, a, true);
    state.visit_site(walk, lat.step(a, k), false);
    let limit = 12 * lat.n_sites() + 16;
    for _ in 0..limit {
        if let Some(l) = &mut state.log {
            l.push((a as u32, k as u8));
        }
        let t = lat.step(a, (k + 5) % 6);
        let active = match lat.state[t] {
            OUTSIDE => {
                let v = lat.corner[a];
                assert!(v != 0, "site walk left the hexagon away from a corner");
                state.traces[walk].end = v;
                return Some(v);
            }
            ACTIVE => true,
            VACANT => false,
            FREE => state.cell(t, src)?,
            _ => unreachable!(),
        };
        if lat.state[t] == FREE {
            state.visit_cell(walk, t as u32);
        }
        if active {
            a = t;
            k = (k + 1) % 6;
            state.visit_site(walk, t, true);
        } else {
            k = (k + 5) % 6;
            state.visit_site(walk, t, false);
        }
    }
    panic!("site walk from vertex {} did not terminate", start.vertex);
}

/// Run the walks of one sample on a bond lattice.
pub(crate) fn bond_sample<S: CellSource>(
    lat: &BondLattice,
    state: &mut WalkState,
    src: &mut S,
) -> Option<Connectivity> {
    state.begin();
    let mut ends = Vec::with_capacity(lat.starts.len());
    for (w, &st) in lat.starts.iter().enumerate() {
        let e = bond_walk(lat, st, w, state, src)?;
        ends.push((st.vertex, e));
    }
    Some(Connectivity(ends))
}

/// Run the three walks of one site-percolation sample.
pub(crate) fn site_sample<S: CellSource>(
    lat: &SiteLattice,
    state: &mut WalkState,
    src: &mut S,
) -> Option<Connectivity> {
    state.begin();
    let mut ends = Vec::with_capacity(3);
    for (w, &st) in lat.starts.iter().enumerate() {
        let e = site_walk(lat, st, w, state, src)?;
        ends.push((st.vertex, e));
    }
    Some(Connectivity(ends))
}

pub(crate) fn bond_state(lat: &BondLattice) -> WalkState {
    let (w, h) = (2 * lat.frame.nx, 2 * lat.frame.ny);
    WalkState::new(lat.n_bond_slots(), w * h, lat.n_sites())
}

pub(crate) fn site_state(lat: &SiteLattice) -> WalkState {
    WalkState::new(lat.n_sites(), lat.n_sites(), lat.n_sites())
}

/// Two bond-percolation hull walks in the rectangle, from vertices 1 and 3.
pub fn perc_hull_walk_rect<S: CellSource>(spec: &LatticeSpec, src: &mut S) -> Result<(Vec<WalkTrace>, Connectivity)> {
    if spec.model != Model::BondPerc || !matches!(spec.kind, LatticeKind::SquareRect { .. }) {
        return Err(Error::Precondition("rectangle hull walks need bond percolation on the square lattice".into()));
    }
    let lat = BondLattice::new(spec);
    let mut state = bond_state(&lat);
    let conn = bond_sample(&lat, &mut state, src).ok_or_else(|| Error::Precondition("cell source exhausted".into()))?;
    Ok((state.traces, conn))
}

/// Three site-percolation hull walks in the hexagon, from vertices 1, 3, 5.
pub fn perc_hull_walk_hex<S: CellSource>(spec: &LatticeSpec, src: &mut S) -> Result<(Vec<WalkTrace>, Connectivity)> {
    let side = match (spec.kind, spec.model) {
        (LatticeKind::TriangularHex { side }, Model::SitePerc) => side,
        _ => {
            return Err(Error::Precondition(
                "hexagon hull walks need site percolation on the triangular lattice".into(),
            ))
        }
    };
    let lat = SiteLattice::new(side);
    let mut state = site_state(&lat);
    let conn = site_sample(&lat, &mut state, src).ok_or_else(|| Error::Precondition("cell source exhausted".into()))?;
    Ok((state.traces, conn))
}

/// Perimeter of the boundary cluster met by the walk from vertex `start`,
/// read off a complete bond configuration indexed by bond slot.
pub fn fk_perimeter_walk(spec: &LatticeSpec, bonds: &[bool], start: u8) -> Result<WalkTrace> {
    let lat = BondLattice::new(spec);
    if bonds.len() != lat.n_bond_slots() {
        return Err(Error::Precondition(format!(
            "bond configuration has {} slots, lattice has {}",
            bonds.len(),
            lat.n_bond_slots()
        )));
    }
    let st = *lat
        .starts
        .iter()
        .find(|s| s.vertex == start)
        .ok_or_else(|| Error::Precondition(format!("no walk starts at vertex {start}")))?;
    let mut state = bond_state(&lat);
    state.begin();
    bond_walk(&lat, st, 0, &mut state, &mut Preset(bonds)).expect("preset source is complete");
    Ok(state.traces.remove(0))
}
