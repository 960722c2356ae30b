//! Pinch-point tallies over the lattice grid.

use std::collections::BTreeMap;

use super::{Connectivity, WalkTrace};
use crate::theory::PinchEvent;

/// Per-label integer grids, sample count and connectivity histogram.
#[derive(Debug, Clone, Default)]
pub struct TallySet {
    pub width: usize,
    pub height: usize,
    pub grids: BTreeMap<String, Vec<u64>>,
    pub sample_count: u64,
    pub connectivity: BTreeMap<String, u64>,
    /// Integrated autocorrelation time of the walk length, per Ising chain.
    pub autocorrelation: BTreeMap<u64, f64>,
    scratch: Vec<u8>,
}

impl PartialEq for TallySet {
    fn eq(&self, o: &TallySet) -> bool {
        self.width == o.width
            && self.height == o.height
            && self.grids == o.grids
            && self.sample_count == o.sample_count
            && self.connectivity == o.connectivity
            && self.autocorrelation == o.autocorrelation
    }
}

/// Grid labels: one-pinch grids per walk arc `arcAB`, two-pinch grids by
/// event label, and the hexagon three-pinch grid.
pub(crate) fn labels(n_arcs: usize) -> Vec<String> {
    let mut out = Vec::new();
    if n_arcs == 2 {
        for arc in ["12", "14", "23", "34"] {
            out.push(format!("arc{arc}"));
        }
        out.push(PinchEvent::RectTwo.to_string());
    } else {
        for a in [1u8, 3, 5] {
            for b in [2u8, 4, 6] {
                out.push(format!("arc{}{}", a.min(b), a.max(b)));
            }
        }
        for i in 1..=6 {
            out.push(PinchEvent::HexTwo(i).to_string());
        }
        out.push(PinchEvent::HexThree.to_string());
    }
    out.sort();
    out
}

/// Grid label of one-pinch events on the arc joining `a` and `b`.
pub fn arc_label(a: u8, b: u8) -> String {
    format!("arc{}{}", a.min(b), a.max(b))
}

/// `e` with `{a, b} = {e, e + 1}` cyclically mod `m`.
fn consecutive(a: u8, b: u8, m: u8) -> Option<u8> {
    if b % m + 1 == a {
        Some(b)
    } else if a % m + 1 == b {
        Some(a)
    } else {
        None
    }
}

/// Two-pinch label for arcs `p` and `q` of a connectivity.
fn two_label(conn: &Connectivity, p: usize, q: usize) -> Option<String> {
    let m = conn.0.len();
    if m == 2 {
        return Some(PinchEvent::RectTwo.to_string());
    }
    let r = (0..m).find(|&k| k != p && k != q)?;
    let (a, b) = conn.0[r];
    let e = consecutive(a, b, 6)?;
    let i = (e + 6 - 4 - 1) % 6 + 1;
    Some(PinchEvent::HexTwo(i).to_string())
}

impl TallySet {
    pub fn new(width: usize, height: usize, labels: &[String]) -> TallySet {
        TallySet {
            width,
            height,
            grids: labels.iter().map(|l| (l.clone(), vec![0; width * height])).collect(),
            ..Default::default()
        }
    }

    pub fn empty_like(&self) -> TallySet {
        TallySet::new(self.width, self.height, &self.grids.keys().cloned().collect::<Vec<_>>())
    }

    /// Exact elementwise sum.
    pub fn merge(mut self, other: TallySet) -> TallySet {
        if self.grids.is_empty() && self.sample_count == 0 {
            return other;
        }
        for (k, g) in other.grids {
            let dst = self.grids.entry(k).or_insert_with(|| vec![0; g.len()]);
            for (d, s) in dst.iter_mut().zip(g) {
                *d += s;
            }
        }
        self.sample_count += other.sample_count;
        for (k, c) in other.connectivity {
            *self.connectivity.entry(k).or_insert(0) += c;
        }
        self.autocorrelation.extend(other.autocorrelation);
        self
    }

    pub fn grid(&self, label: &str) -> Option<&[u64]> {
        self.grids.get(label).map(|g| g.as_slice())
    }

    pub fn total(&self, label: &str) -> u64 {
        self.grid(label).map_or(0, |g| g.iter().sum())
    }

    /// Mean integrated autocorrelation time over chains.
    pub fn mean_autocorrelation(&self) -> Option<f64> {
        if self.autocorrelation.is_empty() {
            return None;
        }
        Some(self.autocorrelation.values().sum::<f64>() / self.autocorrelation.len() as f64)
    }
}

fn grid_mut(grids: &mut BTreeMap<String, Vec<u64>>, label: String, n: usize) -> &mut Vec<u64> {
    grids.entry(label).or_insert_with(|| vec![0; n])
}

/// Add one sample: every cell of every walk is a one-pinch point of that
/// walk's arc (two-pinch points included), cells on two walks are two-pinch
/// points, cells on three walks three-pinch points.
pub fn tally(traces: &[WalkTrace], tallies: &mut TallySet) {
    let n = tallies.width * tallies.height;
    let TallySet { grids, scratch, .. } = tallies;
    if scratch.len() != n {
        *scratch = vec![0; n];
    }
    let conn = Connectivity(traces.iter().map(|t| (t.start, t.end)).collect());
    for (w, t) in traces.iter().enumerate() {
        for &c in &t.cells {
            scratch[c as usize] |= 1 << w;
        }
    }
    for t in traces {
        let g = grid_mut(grids, arc_label(t.start, t.end), n);
        for &c in &t.cells {
            g[c as usize] += 1;
        }
    }
    for p in 0..traces.len() {
        for q in p + 1..traces.len() {
            let Some(label) = two_label(&conn, p, q) else { continue };
            let g = grid_mut(grids, label, n);
            for &c in &traces[p].cells {
                if scratch[c as usize] & (1 << q) != 0 {
                    g[c as usize] += 1;
                }
            }
        }
    }
    if traces.len() == 3 {
        let g = grid_mut(grids, PinchEvent::HexThree.to_string(), n);
        for &c in &traces[0].cells {
            if scratch[c as usize] == 0b111 {
                g[c as usize] += 1;
            }
        }
    }
    for t in traces {
        for &c in &t.cells {
            scratch[c as usize] = 0;
        }
    }
    tallies.sample_count += 1;
    *tallies.connectivity.entry(conn.to_string()).or_insert(0) += 1;
}
