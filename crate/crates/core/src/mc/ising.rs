//! Swendsen-Wang updates for the Ising model with wired sides.

use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

use super::lattice::BondLattice;
use super::walk::threshold;
use super::{LatticeSpec, Model};
use crate::{Error, Result};

/// Spins, the last FK bond configuration and union-find scratch.
#[derive(Debug, Clone)]
pub struct IsingState {
    pub(crate) lat: BondLattice,
    /// `+1`/`-1` on existing sites, `0` elsewhere.
    pub spins: Vec<i8>,
    /// Open FK bonds by bond slot.
    pub bonds: Vec<bool>,
    edges: Vec<(u32, u32, u32, bool)>,
    parent: Vec<u32>,
    color: Vec<i8>,
    mutual: bool,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

impl IsingState {
    /// All spins `+1`.
    pub fn ordered(spec: &LatticeSpec) -> Result<IsingState> {
        if spec.model != Model::IsingFk {
            return Err(Error::Precondition("Swendsen-Wang needs the ising_fk model".into()));
        }
        let lat = BondLattice::new(spec);
        let mut spins = vec![0i8; lat.n_sites()];
        for s in lat.sites() {
            spins[s] = 1;
        }
        let edges = lat.bonds().into_iter().map(|(b, s, u)| (b as u32, s as u32, u as u32, lat.forced(s, u))).collect();
        let n = lat.n_sites();
        Ok(IsingState {
            bonds: vec![false; lat.n_bond_slots()],
            spins,
            edges,
            parent: (0..n as u32).collect(),
            color: vec![0; n],
            mutual: spec.wiring.n_arcs == 2 && spec.wiring.index == 2,
            lat,
        })
    }

    /// Independent uniform spins, each wired side uniform.
    pub fn random(spec: &LatticeSpec, rng: &mut ChaCha8Rng) -> Result<IsingState> {
        let mut st = IsingState::ordered(spec)?;
        let mut side_spin = [0i8; 8];
        let sites: Vec<usize> = st.lat.sites().collect();
        for s in sites {
            let side = st.lat.side[s] as usize;
            let fresh = if rng.next_u32() & 1 == 1 { 1 } else { -1 };
            st.spins[s] = if side == 0 {
                fresh
            } else {
                if side_spin[side] == 0 {
                    side_spin[side] = fresh;
                }
                side_spin[side]
            };
        }
        if st.mutual {
            let (l, r) = (side_spin[4], side_spin[2]);
            if l != r {
                for s in 0..st.spins.len() {
                    if st.lat.side[s] == 2 {
                        st.spins[s] = l;
                    }
                }
            }
        }
        Ok(st)
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    /// Sites carrying spins, in index order.
    pub fn sites(&self) -> Vec<usize> {
        self.lat.sites().collect()
    }

    /// Bond slots with their endpoint sites.
    pub fn bond_list(&self) -> Vec<(usize, usize, usize)> {
        self.edges.iter().map(|&(b, s, u, _)| (b as usize, s as usize, u as usize)).collect()
    }
}

/// One Swendsen-Wang update with activation probability `spec.p_c`:
/// bonds open between equal spins (always along wired sides), clusters
/// found by union-find, each cluster recoloured by a fair coin. Returns the
/// FK configuration the clusters were built from.
pub fn sw_ising_sample<'a>(spec: &LatticeSpec, state: &'a mut IsingState, rng: &mut ChaCha8Rng) -> &'a [bool] {
    let t = threshold(spec.p_c);
    let always = spec.p_c >= 1.0;
    let never = spec.p_c <= 0.0;
    for (i, p) in state.parent.iter_mut().enumerate() {
        *p = i as u32;
    }
    for &(b, s, u, forced) in &state.edges {
        let open =
            forced || (state.spins[s as usize] == state.spins[u as usize] && !never && (always || rng.next_u64() < t));
        state.bonds[b as usize] = open;
        if open {
            union(&mut state.parent, s, u);
        }
    }
    if state.mutual {
        let left = state.lat.sites().find(|&s| state.lat.side[s] == 4);
        let right = state.lat.sites().find(|&s| state.lat.side[s] == 2);
        if let (Some(a), Some(b)) = (left, right) {
            union(&mut state.parent, a as u32, b as u32);
        }
    }
    state.color.iter_mut().for_each(|c| *c = 0);
    let (mut bits, mut left) = (0u64, 0u32);
    for s in 0..state.spins.len() {
        if state.spins[s] == 0 {
            continue;
        }
        let r = find(&mut state.parent, s as u32) as usize;
        if state.color[r] == 0 {
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            state.color[r] = if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
            left -= 1;
        }
        state.spins[s] = state.color[r];
    }
    &state.bonds
}
