//! Site and bond bookkeeping for the square rectangle and the triangular
//! hexagon, including the map from tally cells to continuum points.

use super::{LatticeKind, LatticeSpec, Model};

pub(crate) const SQUARE: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
pub(crate) const TRIANGULAR: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

pub(crate) const NONE: u32 = u32::MAX;

/// Hexagonal distance of an axial point from the origin.
pub(crate) fn layer(x: i32, y: i32) -> i32 {
    x.abs().max(y.abs()).max((x + y).abs())
}

pub(crate) fn rot60((x, y): (i32, i32)) -> (i32, i32) {
    (-y, x + y)
}

/// Corners `c_1..c_6` of the ring at layer `r`, counterclockwise from
/// bottom left.
pub(crate) fn hex_corners(r: i32) -> [(i32, i32); 6] {
    let mut c = [(0, -r); 6];
    for k in 1..6 {
        c[k] = rot60(c[k - 1]);
    }
    c
}

/// Side `[k, k+1]` of the ring at layer `r` containing `(x, y)`; a corner
/// belongs to its odd (wired) side.
pub(crate) fn ring_side(x: i32, y: i32, r: i32) -> u8 {
    let tight = [y == -r, x == r, x + y == r, y == r, x == -r, x + y == -r];
    let sides: Vec<u8> = (1..=6u8).filter(|&k| tight[(k - 1) as usize]).collect();
    sides.iter().copied().find(|k| k % 2 == 1).unwrap_or(sides[0])
}

/// Padded rectangular box of integer coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub x0: i32,
    pub y0: i32,
    pub nx: usize,
    pub ny: usize,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, x: i32, y: i32) -> usize {
        debug_assert!(x >= self.x0 && y >= self.y0);
        (x - self.x0) as usize + (y - self.y0) as usize * self.nx
    }

    pub fn coords(&self, s: usize) -> (i32, i32) {
        ((s % self.nx) as i32 + self.x0, (s / self.nx) as i32 + self.y0)
    }

    pub fn offset(&self, (dx, dy): (i32, i32)) -> isize {
        dx as isize + dy as isize * self.nx as isize
    }
}

/// Where a walk starts: vertex label, site and first direction examined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Start {
    pub vertex: u8,
    pub site: usize,
    pub dir: usize,
}

/// Planar lattice whose bonds carry the randomness (bond percolation and FK
/// clusters). Walks examine flags `(site, direction)` and rotate with
/// `chirality` around a site when the bond is closed.
#[derive(Debug, Clone)]
pub(crate) struct BondLattice {
    pub kind: LatticeKind,
    pub dirs: &'static [(i32, i32)],
    pub frame: Frame,
    pub offsets: Vec<isize>,
    pub exists: Vec<bool>,
    /// Wired side label per site, `0` when free.
    pub side: Vec<u8>,
    /// Vertex label of ring corners (hexagon only).
    pub corner: Vec<u8>,
    pub chirality: usize,
    pub starts: Vec<Start>,
    /// Tally cell of each bond slot, `NONE` for absent or forced bonds.
    pub bond_cell: Vec<u32>,
}

impl BondLattice {
    pub fn new(spec: &LatticeSpec) -> BondLattice {
        match spec.kind {
            LatticeKind::SquareRect { width, height } => BondLattice::square(width, height),
            LatticeKind::TriangularHex { side } => BondLattice::triangular(side),
        }
    }

    fn square(w: usize, h: usize) -> BondLattice {
        let (wi, hi) = (w as i32, h as i32);
        let frame = Frame { x0: -1, y0: -1, nx: w + 3, ny: h + 2 };
        let mut exists = vec![false; frame.len()];
        let mut side = vec![0u8; frame.len()];
        for j in 0..hi {
            for i in 0..=wi {
                let s = frame.index(i, j);
                exists[s] = true;
                side[s] = if i == 0 {
                    4
                } else if i == wi {
                    2
                } else {
                    0
                };
            }
        }
        let starts = vec![
            Start { vertex: 1, site: frame.index(0, 0), dir: 0 },
            Start { vertex: 3, site: frame.index(wi, hi - 1), dir: 2 },
        ];
        let corner = vec![0; frame.len()];
        BondLattice::finish(
            LatticeKind::SquareRect { width: w, height: h },
            &SQUARE,
            frame,
            exists,
            side,
            corner,
            1,
            starts,
        )
    }

    fn triangular(l: usize) -> BondLattice {
        let r = l as i32 + 1;
        let frame = Frame { x0: -r - 1, y0: -r - 1, nx: 2 * l + 5, ny: 2 * l + 5 };
        let mut exists = vec![false; frame.len()];
        let mut side = vec![0u8; frame.len()];
        for y in -r..=r {
            for x in -r..=r {
                let k = layer(x, y);
                let s = frame.index(x, y);
                if k < r {
                    exists[s] = true;
                } else if k == r {
                    let sd = ring_side(x, y, r);
                    if sd % 2 == 1 {
                        exists[s] = true;
                        side[s] = sd;
                    }
                }
            }
        }
        let mut corner = vec![0u8; frame.len()];
        let corners = hex_corners(r);
        for (k, &(x, y)) in corners.iter().enumerate() {
            corner[frame.index(x, y)] = k as u8 + 1;
        }
        let starts = [0usize, 2, 4]
            .iter()
            .map(|&k| {
                let (x, y) = corners[k];
                Start { vertex: k as u8 + 1, site: frame.index(x, y), dir: 1 + k }
            })
            .collect();
        BondLattice::finish(LatticeKind::TriangularHex { side: l }, &TRIANGULAR, frame, exists, side, corner, 5, starts)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        kind: LatticeKind,
        dirs: &'static [(i32, i32)],
        frame: Frame,
        exists: Vec<bool>,
        side: Vec<u8>,
        corner: Vec<u8>,
        chirality: usize,
        starts: Vec<Start>,
    ) -> BondLattice {
        let offsets = dirs.iter().map(|&d| frame.offset(d)).collect();
        let mut lat =
            BondLattice { kind, dirs, frame, offsets, exists, side, corner, chirality, starts, bond_cell: vec![] };
        let half = dirs.len() / 2;
        let gw = 2 * frame.nx;
        let mut cells = vec![NONE; frame.len() * half];
        for s in 0..frame.len() {
            if !lat.exists[s] {
                continue;
            }
            let (x, y) = frame.coords(s);
            for d in 0..half {
                if let Some(u) = lat.neighbor(s, d) {
                    if !lat.forced(s, u) {
                        let (dx, dy) = dirs[d];
                        let gx = (2 * (x - frame.x0) + dx) as usize;
                        let gy = (2 * (y - frame.y0) + dy) as usize;
                        cells[s * half + d] = (gy * gw + gx) as u32;
                    }
                }
            }
        }
        lat.bond_cell = cells;
        lat
    }

    pub fn deg(&self) -> usize {
        self.dirs.len()
    }

    pub fn n_sites(&self) -> usize {
        self.frame.len()
    }

    pub fn n_bond_slots(&self) -> usize {
        self.frame.len() * self.deg() / 2
    }

    pub fn neighbor(&self, s: usize, d: usize) -> Option<usize> {
        let u = (s as isize + self.offsets[d]) as usize;
        if self.exists[u] {
            Some(u)
        } else {
            None
        }
    }

    /// Canonical slot of the bond leaving `s` in direction `d`.
    pub fn bond(&self, s: usize, d: usize) -> usize {
        let half = self.deg() / 2;
        if d < half {
            s * half + d
        } else {
            (s as isize + self.offsets[d]) as usize * half + (d - half)
        }
    }

    /// Bonds along a wired side are always open.
    pub fn forced(&self, s: usize, u: usize) -> bool {
        self.side[s] != 0 && self.side[s] == self.side[u]
    }

    /// Vertex reached when the flag `(s, d)` points out of the domain at a
    /// polygon corner.
    pub fn terminal(&self, s: usize, d: usize) -> Option<u8> {
        match self.kind {
            LatticeKind::SquareRect { .. } => {
                let vertical = d % 2 == 1;
                if !vertical || self.side[s] == 0 {
                    return None;
                }
                let up = d == 1;
                Some(match (self.side[s], up) {
                    (4, false) => 1,
                    (2, false) => 2,
                    (2, true) => 3,
                    _ => 4,
                })
            }
            LatticeKind::TriangularHex { .. } => match self.corner[s] {
                0 => None,
                v => Some(v),
            },
        }
    }

    /// Sites carrying a spin: every existing site.
    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.frame.len()).filter(|&s| self.exists[s])
    }

    /// Existing bonds as `(slot, s, u)`.
    pub fn bonds(&self) -> Vec<(usize, usize, usize)> {
        let half = self.deg() / 2;
        let mut out = Vec::new();
        for s in self.sites() {
            for d in 0..half {
                if let Some(u) = self.neighbor(s, d) {
                    out.push((s * half + d, s, u));
                }
            }
        }
        out
    }
}

/// Site fixed states in the site-percolation hexagon.
pub(crate) const OUTSIDE: u8 = 0;
pub(crate) const FREE: u8 = 1;
pub(crate) const ACTIVE: u8 = 2;
pub(crate) const VACANT: u8 = 3;

/// Triangular-lattice hexagon for site percolation: free sites up to layer
/// `L`, a fixed ring at `L + 1`, and a guard layer outside.
#[derive(Debug, Clone)]
pub(crate) struct SiteLattice {
    pub side: usize,
    pub frame: Frame,
    pub offsets: [isize; 6],
    pub state: Vec<u8>,
    pub corner: Vec<u8>,
    /// Walk starts: vertex, active corner site, direction of its vacant
    /// ring neighbour.
    pub starts: Vec<Start>,
}

impl SiteLattice {
    pub fn new(l: usize) -> SiteLattice {
        let r = l as i32 + 1;
        let frame = Frame { x0: -r - 1, y0: -r - 1, nx: 2 * l + 5, ny: 2 * l + 5 };
        let mut state = vec![OUTSIDE; frame.len()];
        for y in -r..=r {
            for x in -r..=r {
                let k = layer(x, y);
                let s = frame.index(x, y);
                state[s] = if k < r {
                    FREE
                } else if k == r {
                    if ring_side(x, y, r) % 2 == 1 {
                        ACTIVE
                    } else {
                        VACANT
                    }
                } else {
                    OUTSIDE
                };
            }
        }
        let mut offsets = [0isize; 6];
        for (d, &v) in TRIANGULAR.iter().enumerate() {
            offsets[d] = frame.offset(v);
        }
        let mut corner = vec![0u8; frame.len()];
        let corners = hex_corners(r);
        for (k, &(x, y)) in corners.iter().enumerate() {
            corner[frame.index(x, y)] = k as u8 + 1;
        }
        let starts = [0usize, 2, 4]
            .iter()
            .map(|&k| {
                let (x, y) = corners[k];
                Start { vertex: k as u8 + 1, site: frame.index(x, y), dir: (2 + k) % 6 }
            })
            .collect();
        SiteLattice { side: l, frame, offsets, state, corner, starts }
    }

    pub fn n_sites(&self) -> usize {
        self.frame.len()
    }

    pub fn step(&self, s: usize, d: usize) -> usize {
        (s as isize + self.offsets[d]) as usize
    }

    /// Free sites in row-major order.
    pub fn free_sites(&self) -> Vec<usize> {
        (0..self.frame.len()).filter(|&s| self.state[s] == FREE).collect()
    }
}

/// Geometry of the tally grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridMap {
    spec: LatticeSpec,
    frame: Frame,
    doubled: bool,
}

impl GridMap {
    pub fn of(spec: &LatticeSpec) -> GridMap {
        let (frame, doubled) = match (spec.kind, spec.model) {
            (LatticeKind::SquareRect { width, height }, _) => {
                (Frame { x0: -1, y0: -1, nx: width + 3, ny: height + 2 }, true)
            }
            (LatticeKind::TriangularHex { side }, m) => {
                let r = side as i32 + 1;
                (Frame { x0: -r - 1, y0: -r - 1, nx: 2 * side + 5, ny: 2 * side + 5 }, m != Model::SitePerc)
            }
        };
        GridMap { spec: *spec, frame, doubled }
    }

    pub fn dims(&self) -> (usize, usize) {
        if self.doubled {
            (2 * self.frame.nx, 2 * self.frame.ny)
        } else {
            (self.frame.nx, self.frame.ny)
        }
    }

    /// Continuum point of a cell if some walk can tally it.
    pub fn point(&self, ix: usize, iy: usize) -> Option<(f64, f64)> {
        let (w, h) = self.dims();
        if ix >= w || iy >= h {
            return None;
        }
        let f = self.frame;
        match self.spec.kind {
            LatticeKind::SquareRect { width, height } => {
                // bond midpoints: exactly one doubled coordinate odd
                if (ix + iy) % 2 == 0 {
                    return None;
                }
                let gx = ix as i32 + 2 * f.x0;
                let gy = iy as i32 + 2 * f.y0;
                let (wd, hd) = (2 * width as i32, 2 * height as i32);
                let horizontal = gx % 2 != 0;
                let ok = if horizontal {
                    gx > 0 && gx < wd && gy >= 0 && gy <= hd - 2
                } else {
                    gx > 0 && gx < wd && gy >= 0 && gy <= hd - 3
                };
                if !ok {
                    return None;
                }
                let x = gx as f64 / 2.0;
                let y = gy as f64 / 2.0 + 0.5;
                Some((x / height as f64, y / height as f64))
            }
            LatticeKind::TriangularHex { side } => {
                let r = side as i32 + 1;
                let (a, b) = if self.doubled {
                    if ix % 2 == 0 && iy % 2 == 0 {
                        return None;
                    }
                    let ga = ix as i32 + 2 * f.x0;
                    let gb = iy as i32 + 2 * f.y0;
                    // both ends inside layer r, not both on the ring
                    let (dx, dy) = (ga.rem_euclid(2), gb.rem_euclid(2));
                    let (dx, dy) = if dx == 1 && dy == 1 { (-1, 1) } else { (dx, dy) };
                    let (s0, s1) = ((ga - dx) / 2, (gb - dy) / 2);
                    let (u0, u1) = (s0 + dx, s1 + dy);
                    let (ls, lu) = (layer(s0, s1), layer(u0, u1));
                    let ring = |x: i32, y: i32| ring_side(x, y, r) % 2 == 1;
                    let live = |x: i32, y: i32, l: i32| l < r || (l == r && ring(x, y));
                    if !live(s0, s1, ls) || !live(u0, u1, lu) {
                        return None;
                    }
                    if ls == r && lu == r && ring_side(s0, s1, r) == ring_side(u0, u1, r) {
                        return None;
                    }
                    (ga as f64 / 2.0, gb as f64 / 2.0)
                } else {
                    let (x, y) = (ix as i32 + f.x0, iy as i32 + f.y0);
                    if layer(x, y) > side as i32 {
                        return None;
                    }
                    (x as f64, y as f64)
                };
                let scale = side as f64 + 0.5;
                let px = a + 0.5 * b;
                let py = b * 3f64.sqrt() / 2.0;
                Some((px / scale, py / scale))
            }
        }
    }
}
