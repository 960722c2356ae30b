//! Brute-force oracles on minimal lattices: connectivity by union-find over
//! every configuration, walk outcome distributions by exhausting the walk's
//! decision tree, and exact Boltzmann weights for Swendsen-Wang checks.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ising::{sw_ising_sample, IsingState};
use super::lattice::{hex_corners, BondLattice, SiteLattice, ACTIVE, FREE, OUTSIDE};
use super::walk::{bond_sample, bond_state, site_sample, site_state, Script};
use super::{LatticeSpec, Model};
use crate::{Error, Result};

/// Largest number of free cells enumerated.
pub const MAX_FREE: usize = 24;

pub(crate) struct Uf(Vec<usize>);

impl Uf {
    pub(crate) fn new(n: usize) -> Uf {
        Uf((0..n).collect())
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Union-find over open bonds, wired sides included.
pub(crate) fn primal_clusters(lat: &BondLattice, cfg: &[bool]) -> Uf {
    let mut uf = Uf::new(lat.n_sites());
    for (b, s, u) in lat.bonds() {
        if lat.forced(s, u) || cfg[b] {
            uf.union(s, u);
        }
    }
    uf
}

pub(crate) fn free_bonds(lat: &BondLattice) -> Vec<(usize, usize, usize)> {
    lat.bonds().into_iter().filter(|&(_, s, u)| !lat.forced(s, u)).collect()
}

pub(crate) fn bond_config(lat: &BondLattice, free: &[(usize, usize, usize)], mask: u64) -> Vec<bool> {
    let mut cfg = vec![false; lat.n_bond_slots()];
    for (k, &(b, _, _)) in free.iter().enumerate() {
        cfg[b] = mask >> k & 1 == 1;
    }
    cfg
}

/// Whether the wired columns of a `width`-wide rectangle are joined.
pub(crate) fn rect_crossing(lat: &BondLattice, cfg: &[bool], width: usize) -> bool {
    let mut uf = primal_clusters(lat, cfg);
    let (a, b) = (lat.frame.index(0, 0), lat.frame.index(width as i32, 0));
    uf.find(a) == uf.find(b)
}

pub(crate) fn site_active(lat: &SiteLattice, cfg: &[bool], s: usize) -> bool {
    match lat.state[s] {
        ACTIVE => true,
        FREE => cfg[s],
        _ => false,
    }
}

/// Union-find over active (or vacant) sites, fixed ring included.
pub(crate) fn site_clusters(lat: &SiteLattice, cfg: &[bool], active: bool) -> Uf {
    let mut uf = Uf::new(lat.n_sites());
    for s in 0..lat.n_sites() {
        if lat.state[s] == OUTSIDE || site_active(lat, cfg, s) != active {
            continue;
        }
        for d in 0..3 {
            let u = lat.step(s, d);
            if lat.state[u] != OUTSIDE && site_active(lat, cfg, u) == active {
                uf.union(s, u);
            }
        }
    }
    uf
}

pub(crate) fn hex_config(lat: &SiteLattice, free: &[usize], mask: u64) -> Vec<bool> {
    let mut cfg = vec![false; lat.n_sites()];
    for (k, &s) in free.iter().enumerate() {
        cfg[s] = mask >> k & 1 == 1;
    }
    cfg
}

/// Exterior matching read off which wired sides are joined.
pub(crate) fn hex_matching(lat: &SiteLattice, cfg: &[bool]) -> &'static str {
    let mut uf = site_clusters(lat, cfg, true);
    let c: Vec<usize> = hex_corners(lat.side as i32 + 1).iter().map(|&(x, y)| lat.frame.index(x, y)).collect();
    let mut joined = |a: usize, b: usize| {
        let (ra, rb) = (uf.find(c[a]), uf.find(c[b]));
        ra == rb
    };
    match (joined(0, 2), joined(2, 4), joined(4, 0)) {
        (false, false, false) => "(12)(34)(56)",
        (true, false, false) => "(14)(23)(56)",
        (false, true, false) => "(12)(36)(45)",
        (false, false, true) => "(16)(25)(34)",
        _ => "(16)(23)(45)",
    }
}

/// Outcome distribution of a walk driven by fair decisions.
pub(crate) fn decision_tree<F: FnMut(&mut Script) -> Option<String>>(mut run: F) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let mut sc = Script { bits: prefix.clone(), used: 0 };
        match run(&mut sc) {
            Some(c) => {
                assert_eq!(sc.used, prefix.len(), "walk ignored part of its script");
                *out.entry(c).or_insert(0.0) += 0.5f64.powi(prefix.len() as i32);
            }
            None => {
                for b in [false, true] {
                    let mut p = prefix.clone();
                    p.push(b);
                    stack.push(p);
                }
            }
        }
    }
    out
}

fn too_many(n: usize) -> Result<()> {
    if n > MAX_FREE {
        return Err(Error::Precondition(format!("{n} free cells is too many to enumerate")));
    }
    Ok(())
}

/// Crossing distribution of fair bond percolation in a `width x height`
/// rectangle over every configuration.
pub fn rect_enumerated(width: usize, height: usize) -> Result<BTreeMap<String, f64>> {
    let spec = LatticeSpec::rect_percolation(width, height)?;
    let lat = BondLattice::new(&spec);
    let free = free_bonds(&lat);
    too_many(free.len())?;
    let mut out = BTreeMap::new();
    let weight = 0.5f64.powi(free.len() as i32);
    for mask in 0..1u64 << free.len() {
        let cfg = bond_config(&lat, &free, mask);
        let key = if rect_crossing(&lat, &cfg, width) { "(12)(34)" } else { "(14)(23)" };
        *out.entry(key.to_string()).or_insert(0.0) += weight;
    }
    Ok(out)
}

/// Connectivity distribution produced by the rectangle hull walks.
pub fn rect_walked(width: usize, height: usize) -> Result<BTreeMap<String, f64>> {
    let spec = LatticeSpec::rect_percolation(width, height)?;
    let lat = BondLattice::new(&spec);
    too_many(free_bonds(&lat).len())?;
    let mut state = bond_state(&lat);
    Ok(decision_tree(|sc| bond_sample(&lat, &mut state, sc).map(|c| c.to_string())))
}

/// Matching distribution of fair site percolation in a hexagon of side
/// `side` over every configuration.
pub fn hex_enumerated(side: usize) -> Result<BTreeMap<String, f64>> {
    let lat = SiteLattice::new(side);
    let free = lat.free_sites();
    too_many(free.len())?;
    let weight = 0.5f64.powi(free.len() as i32);
    let mut out = BTreeMap::new();
    for mask in 0..1u64 << free.len() {
        let cfg = hex_config(&lat, &free, mask);
        *out.entry(hex_matching(&lat, &cfg).to_string()).or_insert(0.0) += weight;
    }
    Ok(out)
}

/// Connectivity distribution produced by the hexagon hull walks.
pub fn hex_walked(side: usize) -> Result<BTreeMap<String, f64>> {
    let lat = SiteLattice::new(side);
    too_many(lat.free_sites().len())?;
    let mut state = site_state(&lat);
    Ok(decision_tree(|sc| site_sample(&lat, &mut state, sc).map(|c| c.to_string())))
}

/// Goodness of fit of Swendsen-Wang spin states against exact Boltzmann
/// weights at coupling `-ln(1 - p) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareFit {
    pub chi2: f64,
    pub dof: usize,
    /// 95% quantile of the chi-square law with `dof` degrees of freedom.
    pub critical: f64,
    pub samples: u64,
}

impl ChiSquareFit {
    pub fn passes(&self) -> bool {
        self.chi2 < self.critical
    }
}

/// Run `sweeps` updates, recording every `thin`-th state.
pub fn sw_boltzmann_fit(spec: &LatticeSpec, sweeps: u64, thin: u64, seed: u64) -> Result<ChiSquareFit> {
    if spec.model != Model::IsingFk {
        return Err(Error::Precondition("Boltzmann check needs the ising_fk model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = IsingState::random(spec, &mut rng)?;
    let sites = st.sites();
    if sites.len() > 20 {
        return Err(Error::Precondition(format!("{} spins is too many to enumerate", sites.len())));
    }
    let pos: HashMap<usize, usize> = sites.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let coupling = -(1.0 - spec.p_c).ln() / 2.0;
    let lat = BondLattice::new(spec);
    let edges = st.bond_list();
    let mutual = spec.wiring.n_arcs == 2 && spec.wiring.index == 2;
    let left = sites.iter().copied().find(|&s| lat.side[s] == 4);
    let right = sites.iter().copied().find(|&s| lat.side[s] == 2);
    let mut weights = BTreeMap::new();
    for cfg in 0u32..1 << sites.len() {
        let spin = |s: usize| if cfg >> pos[&s] & 1 == 1 { 1.0 } else { -1.0 };
        if edges.iter().any(|&(_, s, u)| lat.forced(s, u) && spin(s) != spin(u)) {
            continue;
        }
        if let (true, Some(l), Some(r)) = (mutual, left, right) {
            if spin(l) != spin(r) {
                continue;
            }
        }
        let energy: f64 =
            edges.iter().filter(|&&(_, s, u)| !lat.forced(s, u)).map(|&(_, s, u)| spin(s) * spin(u)).sum();
        weights.insert(cfg, (coupling * energy).exp());
    }
    let z: f64 = weights.values().sum();
    let mut counts: HashMap<u32, u64> = HashMap::new();
    let mut samples = 0;
    for k in 0..sweeps {
        sw_ising_sample(spec, &mut st, &mut rng);
        if k % thin == 0 {
            let cfg = sites.iter().enumerate().map(|(i, &s)| ((st.spins[s] > 0) as u32) << i).sum::<u32>();
            if !weights.contains_key(&cfg) {
                return Err(Error::Numeric(format!("sampler reached forbidden state {cfg:b}")));
            }
            *counts.entry(cfg).or_insert(0) += 1;
            samples += 1;
        }
    }
    let n = samples as f64;
    let chi2 = weights
        .iter()
        .map(|(c, w)| {
            let expect = n * w / z;
            let got = *counts.get(c).unwrap_or(&0) as f64;
            (got - expect).powi(2) / expect
        })
        .sum();
    let dof = weights.len() - 1;
    let critical =
        ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(format!("chi-square law: {e}")))?.inverse_cdf(0.95);
    Ok(ChiSquareFit { chi2, dof, critical, samples })
}
