//! Half-plane pinch-point weights, universal partition functions and
//! polygon densities, with finite-difference verifiers for the null-state
//! PDEs and the conformal Ward identities.
//!
//! Point lists are ordered `x_1 < ... < x_{2N}`. The last point may be
//! `+inf`; the weight is then the limit of `x_{2N}^{2 theta_1} Pi`, which
//! drops every factor containing `x_{2N}`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::params::ModelParams;
use crate::quad::{
    double_integral, double_integral_continued, integrate_contour, integrate_piece, integrate_segment_regularized,
    BranchedIntegrand, ContourSpec, Coupling, Factor, Piece, QuadOptions,
};
use crate::scmap::{hex_inverse, rect_inverse, HexGeometry, RectGeometry};
use crate::specfun::{ellip_k, gamma, gauss_2f1, lauricella_fd_regularized, rgamma, FdArgs};
use crate::{Error, Result, C64};

/// Offset used to step around removable singularities in `kappa`.
pub const KAPPA_OFFSET: f64 = 1e-4;
/// A denominator below this magnitude triggers the offset average.
pub const REMOVABLE_TOL: f64 = 1e-6;
/// Points closer than this to the polygon boundary are not evaluated.
pub const BOUNDARY_CLEARANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

/// Pinch-point events with a computable half-plane weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PinchEvent {
    /// Rectangle one-pinch `(i, i+1 : i+2, i+3)`, indices cyclic mod 4.
    RectOne(u8),
    /// Rectangle two-pinch `(1234)`.
    RectTwo,
    /// Hexagon one-pinch combination `(12:34:56) + n (12:36:45)`.
    HexOneCombo,
    /// Hexagon two-pinch `(i..i+3 : i+4, i+5)`, indices cyclic mod 6.
    HexTwo(u8),
    /// Hexagon three-pinch `(123456)`.
    HexThree,
}

fn cyc(i: u8, k: u8, m: u8) -> u8 {
    (i - 1 + k) % m + 1
}

impl PinchEvent {
    pub fn s(&self) -> u32 {
        match self {
            PinchEvent::RectOne(_) | PinchEvent::HexOneCombo => 1,
            PinchEvent::RectTwo | PinchEvent::HexTwo(_) => 2,
            PinchEvent::HexThree => 3,
        }
    }

    pub fn n_arcs(&self) -> usize {
        match self {
            PinchEvent::RectOne(_) | PinchEvent::RectTwo => 2,
            _ => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PinchEvent::RectOne(i) if !(1..=4).contains(&i) => {
                Err(Error::Domain(format!("rectangle one-pinch index {i} outside 1..4")))
            }
            PinchEvent::HexTwo(i) if !(1..=6).contains(&i) => {
                Err(Error::Domain(format!("hexagon two-pinch index {i} outside 1..6")))
            }
            _ => Ok(()),
        }
    }

    /// Point indices `(i, j, k, l)` of a rectangle one-pinch label.
    pub fn rect_indices(&self) -> Option<[u8; 4]> {
        match *self {
            PinchEvent::RectOne(i) => Some([0, 1, 2, 3].map(|k| cyc(i, k, 4))),
            _ => None,
        }
    }

    /// Point indices `(i, j, k, l, m, n)` of a hexagon two-pinch label.
    pub fn hex_indices(&self) -> Option<[u8; 6]> {
        match *self {
            PinchEvent::HexTwo(i) => Some([0, 1, 2, 3, 4, 5].map(|k| cyc(i, k, 6))),
            _ => None,
        }
    }

    /// Arc pairings compatible with the event (one per term of the sum over
    /// connectivities).
    pub fn pairings(&self) -> Vec<Vec<(u8, u8)>> {
        match *self {
            PinchEvent::RectOne(_) => {
                let [i, j, k, l] = self.rect_indices().unwrap_or([1, 2, 3, 4]);
                vec![vec![(i, j), (k, l)]]
            }
            PinchEvent::RectTwo => vec![vec![(1, 2), (3, 4)], vec![(1, 4), (2, 3)]],
            PinchEvent::HexOneCombo => vec![vec![(1, 2), (3, 4), (5, 6)], vec![(1, 2), (3, 6), (4, 5)]],
            PinchEvent::HexTwo(_) => {
                let [a, b, c, d, e, f] = self.hex_indices().unwrap_or([1, 2, 3, 4, 5, 6]);
                vec![vec![(a, b), (c, d), (e, f)], vec![(a, d), (b, c), (e, f)]]
            }
            PinchEvent::HexThree => HEX_MATCHINGS.iter().map(|m| m.to_vec()).collect(),
        }
    }

    /// All events of a polygon with `n_arcs` arcs.
    pub fn all(n_arcs: usize) -> Vec<PinchEvent> {
        match n_arcs {
            2 => (1..=4).map(PinchEvent::RectOne).chain([PinchEvent::RectTwo]).collect(),
            _ => [PinchEvent::HexOneCombo]
                .into_iter()
                .chain((1..=6).map(PinchEvent::HexTwo))
                .chain([PinchEvent::HexThree])
                .collect(),
        }
    }
}

impl fmt::Display for PinchEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PinchEvent::RectOne(_) => {
                let [i, j, k, l] = self.rect_indices().unwrap_or([0; 4]);
                write!(f, "{i}{j}:{k}{l}")
            }
            PinchEvent::RectTwo => write!(f, "1234"),
            PinchEvent::HexOneCombo => write!(f, "12:34:56+12:36:45"),
            PinchEvent::HexTwo(_) => {
                let [a, b, c, d, e, g] = self.hex_indices().unwrap_or([0; 6]);
                write!(f, "{a}{b}{c}{d}:{e}{g}")
            }
            PinchEvent::HexThree => write!(f, "123456"),
        }
    }
}

impl FromStr for PinchEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<PinchEvent> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        if t == "1234" {
            return Ok(PinchEvent::RectTwo);
        }
        if t == "123456" {
            return Ok(PinchEvent::HexThree);
        }
        if t == "12:34:56+12:36:45" || t == "combo" {
            return Ok(PinchEvent::HexOneCombo);
        }
        for e in PinchEvent::all(2).into_iter().chain(PinchEvent::all(3)) {
            if e.to_string() == t {
                return Ok(e);
            }
        }
        Err(Error::Domain(format!("unknown pinch-point label {s:?}")))
    }
}

/// The five non-crossing matchings of six points.
const HEX_MATCHINGS: [[(u8, u8); 3]; 5] = [
    [(1, 6), (2, 5), (3, 4)],
    [(2, 3), (4, 5), (1, 6)],
    [(1, 2), (3, 4), (5, 6)],
    [(1, 4), (2, 3), (5, 6)],
    [(1, 2), (3, 6), (4, 5)],
];

/// Free/fixed side-alternating boundary condition, indexed as
/// rectangle `1` = independent, `2` = mutual; hexagon `1..5` with `3` the
/// independent and `2` the mutual wiring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FfbcEvent {
    pub n_arcs: usize,
    pub index: u8,
}

impl FfbcEvent {
    pub fn new(n_arcs: usize, index: u8) -> Result<FfbcEvent> {
        let ok = match n_arcs {
            2 => (1..=2).contains(&index),
            3 => (1..=5).contains(&index),
            _ => false,
        };
        if !ok {
            return Err(Error::Domain(format!("no ffbc event {index} for {n_arcs} arcs")));
        }
        Ok(FfbcEvent { n_arcs, index })
    }

    pub fn rect_independent() -> FfbcEvent {
        FfbcEvent { n_arcs: 2, index: 1 }
    }

    pub fn hex_independent() -> FfbcEvent {
        FfbcEvent { n_arcs: 3, index: 3 }
    }

    /// Pairing of the points by exterior arcs.
    pub fn exterior(&self) -> Vec<(u8, u8)> {
        match self.n_arcs {
            2 if self.index == 1 => vec![(4, 1), (2, 3)],
            2 => vec![(1, 2), (3, 4)],
            _ => HEX_MATCHINGS[(self.index - 1) as usize].to_vec(),
        }
    }

    pub fn is_mixed(&self) -> bool {
        self.n_arcs == 3 && matches!(self.index, 1 | 4 | 5)
    }

    /// Number of boundary loops formed with an interior pairing.
    pub fn loop_count(&self, interior: &[(u8, u8)]) -> u32 {
        loop_count(&self.exterior(), interior)
    }
}

/// Cycles in the union of two perfect matchings on the same points.
pub fn loop_count(a: &[(u8, u8)], b: &[(u8, u8)]) -> u32 {
    let partner = |m: &[(u8, u8)], x: u8| {
        m.iter().find_map(|&(p, q)| {
            if p == x {
                Some(q)
            } else if q == x {
                Some(p)
            } else {
                None
            }
        })
    };
    let mut seen = Vec::new();
    let mut cycles = 0;
    for &(start, _) in a {
        if seen.contains(&start) {
            continue;
        }
        cycles += 1;
        let mut x = start;
        loop {
            seen.push(x);
            let y = partner(a, x).expect("perfect matching");
            seen.push(y);
            x = match partner(b, y) {
                Some(v) => v,
                None => break,
            };
            if x == start {
                break;
            }
        }
    }
    cycles
}

/// `Upsilon_(event|ffbc) = coefficient * Pi_event`.
pub fn partition_coefficient(event: PinchEvent, ffbc: FfbcEvent, params: &ModelParams) -> Result<f64> {
    event.validate()?;
    if event.n_arcs() != ffbc.n_arcs {
        return Err(Error::Domain(format!("event {event} does not live on the ffbc polygon")));
    }
    let n = params.fugacity_n;
    match event {
        PinchEvent::HexOneCombo if ffbc.index != 3 => {
            Err(Error::Domain("the one-pinch combination is only defined for independent wiring".into()))
        }
        PinchEvent::HexOneCombo => Ok(n.powi(3)),
        _ => Ok(event.pairings().iter().map(|p| n.powi(ffbc.loop_count(p) as i32)).sum()),
    }
}

/// Assemble a universal partition function from a half-plane weight.
pub fn universal_partition(event: PinchEvent, ffbc: FfbcEvent, weight: f64, params: &ModelParams) -> Result<f64> {
    Ok(partition_coefficient(event, ffbc, params)? * weight)
}

// ---------------------------------------------------------------------------
// Configurations and cross-ratios
// ---------------------------------------------------------------------------

fn check_config(xs: &[f64], z: C64, count: usize) -> Result<()> {
    if xs.len() != count {
        return Err(Error::Precondition(format!("expected {count} boundary points, got {}", xs.len())));
    }
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("bulk point {z} is not in the upper half-plane")));
    }
    for (k, w) in xs.windows(2).enumerate() {
        if !(w[0] < w[1]) || (k + 2 < count && !w[1].is_finite()) || !w[0].is_finite() {
            return Err(Error::Domain(format!("boundary points {xs:?} are not strictly increasing")));
        }
    }
    if xs[count - 1] == f64::NEG_INFINITY || xs[count - 1].is_nan() {
        return Err(Error::Domain(format!("boundary points {xs:?} are not strictly increasing")));
    }
    Ok(())
}

fn finite_points(xs: &[f64]) -> &[f64] {
    match xs.last() {
        Some(x) if x.is_infinite() => &xs[..xs.len() - 1],
        _ => xs,
    }
}

/// `prod (x_{2i} - x_{2i-1})`, omitting a pair with an infinite member.
fn pair_product(xs: &[f64]) -> f64 {
    xs.chunks(2).filter(|c| c[1].is_finite()).map(|c| c[1] - c[0]).product()
}

fn vandermonde(xs: &[f64], e: f64) -> f64 {
    let f = finite_points(xs);
    let mut acc = 0.0;
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            acc += (f[j] - f[i]).ln();
        }
    }
    (acc * e).exp()
}

fn bulk_product(xs: &[f64], z: C64, e: f64) -> f64 {
    (finite_points(xs).iter().map(|&x| (z - x).norm().ln()).sum::<f64>() * e).exp()
}

fn cross_ratio(x: C64, x1: f64, xa: f64, xb: f64) -> C64 {
    if xb.is_infinite() {
        (x - x1) / (xa - x1)
    } else {
        (x - x1) * (xb - xa) / ((xa - x1) * (xb - x))
    }
}

/// Independent cross-ratios `eta (< tau < sigma)` and `mu`; `nu` is the
/// conjugate of `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossRatios {
    pub eta: f64,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: C64,
}

impl CrossRatios {
    pub fn rect(eta: f64, mu: C64) -> Result<CrossRatios> {
        let r = CrossRatios { eta, tau: None, sigma: None, mu };
        r.check()?;
        Ok(r)
    }

    pub fn hex(eta: f64, tau: f64, sigma: f64, mu: C64) -> Result<CrossRatios> {
        let r = CrossRatios { eta, tau: Some(tau), sigma: Some(sigma), mu };
        r.check()?;
        Ok(r)
    }

    pub fn from_points(xs: &[f64], z: C64) -> Result<CrossRatios> {
        check_config(xs, z, xs.len())?;
        let m = xs.len();
        let (x1, xa, xb) = (xs[0], xs[m - 2], xs[m - 1]);
        let eta_of = |x: f64| cross_ratio(C64::new(x, 0.0), x1, xa, xb).re;
        let mu = cross_ratio(z, x1, xa, xb);
        match m {
            4 => CrossRatios::rect(eta_of(xs[1]), mu),
            6 => CrossRatios::hex(eta_of(xs[1]), eta_of(xs[2]), eta_of(xs[3]), mu),
            _ => Err(Error::Precondition(format!("cross-ratios need 4 or 6 points, got {m}"))),
        }
    }

    pub fn nu(&self) -> C64 {
        self.mu.conj()
    }

    fn check(&self) -> Result<()> {
        let mut chain = vec![0.0, self.eta];
        chain.extend(self.tau);
        chain.extend(self.sigma);
        chain.push(1.0);
        if chain.windows(2).any(|w| !(w[0] < w[1])) || !(self.mu.im > 0.0) {
            return Err(Error::Domain(format!("cross-ratios {self:?} violate their ordering")));
        }
        Ok(())
    }

    fn hex_parts(&self) -> Result<(f64, f64, f64)> {
        match (self.tau, self.sigma) {
            (Some(t), Some(s)) => Ok((self.eta, t, s)),
            _ => Err(Error::Precondition("hexagon blocks need tau and sigma".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// One-pinch weight for a single arc from `x1` to `x2`.
pub fn weight_pi12(x1: f64, x2: f64, z: C64, params: &ModelParams) -> Result<f64> {
    weight_full_polygon(1, &[x1, x2], z, params)
}

/// Weight of the event where all `N` arcs meet at `z`.
pub fn weight_full_polygon(n_arcs: usize, xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    check_config(xs, z, 2 * n_arcs)?;
    let k = params.kappa;
    let nn = n_arcs as f64;
    let e_bulk = (4.0 * nn + 4.0 - k).powi(2) / (8.0 * k);
    Ok((2.0 * z.im).powf(e_bulk) * vandermonde(xs, 2.0 / k) * bulk_product(xs, z, 1.0 - 4.0 * (nn + 1.0) / k))
}

/// Two-pinch weight written through the cross-ratios.
pub fn weight_two_pinch_covariant(xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    check_config(xs, z, 4)?;
    let k = params.kappa;
    let r = CrossRatios::from_points(xs, z)?;
    let (eta, mu) = (r.eta, r.mu);
    let g = eta.powf(8.0 / k - 1.0)
        * (1.0 - eta).powf(2.0 / k)
        * (2.0 * mu.im).powf(24.0 / k - 2.0)
        * (mu.norm_sqr() * (mu - eta).norm_sqr() * (1.0 - mu).norm_sqr()).powf(0.5 - 6.0 / k);
    Ok(pair_product(xs).powf(1.0 - 6.0 / k) * (2.0 * z.im).powf(k / 8.0 - 6.0 / k - 1.0) * g)
}

/// Three-pinch weight written through the cross-ratios.
pub fn weight_three_pinch_covariant(xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    check_config(xs, z, 6)?;
    let k = params.kappa;
    let r = CrossRatios::from_points(xs, z)?;
    let (eta, tau, sigma) = r.hex_parts()?;
    let mu = r.mu;
    let g = (eta * (sigma - tau)).powf(8.0 / k - 1.0)
        * (tau * sigma * (tau - eta) * (sigma - eta) * (1.0 - eta) * (1.0 - tau) * (1.0 - sigma)).powf(2.0 / k)
        * (2.0 * mu.im).powf(48.0 / k - 3.0)
        * hex_bulk_norms(eta, tau, sigma, mu).powf(0.5 - 8.0 / k);
    Ok(pair_product(xs).powf(1.0 - 6.0 / k) * (2.0 * z.im).powf(k / 8.0 - 16.0 / k - 1.0) * g)
}

fn hex_bulk_norms(eta: f64, tau: f64, sigma: f64, mu: C64) -> f64 {
    mu.norm_sqr() * (mu - eta).norm_sqr() * (mu - tau).norm_sqr() * (mu - sigma).norm_sqr() * (1.0 - mu).norm_sqr()
}

/// `1 / beta(-4/kappa, -4/kappa) = Gamma(2 - 8/kappa) / Gamma(1 - 4/kappa)^2`.
pub fn screening_norm(kappa: f64) -> f64 {
    let r = rgamma(1.0 - 4.0 / kappa);
    gamma(2.0 - 8.0 / kappa) * r * r
}

// ---------------------------------------------------------------------------
// Lauricella blocks
// ---------------------------------------------------------------------------

fn fd(params: &ModelParams, shift: f64, b: Vec<f64>, x: Vec<C64>) -> Result<C64> {
    let k = params.kappa;
    lauricella_fd_regularized(&FdArgs { a: 1.0 - 4.0 / k + shift, b, c: 2.0 - 8.0 / k, x })
}

/// Rectangle block `G_i` with its imaginary part (zero up to rounding).
pub fn rect_block_g_complex(i: usize, r: &CrossRatios, params: &ModelParams) -> Result<C64> {
    rect_block_g_shifted(i, r, params, 0.0)
}

/// `G_i` with the Lauricella parameter `a` moved by `shift`.
pub fn rect_block_g_shifted(i: usize, r: &CrossRatios, params: &ModelParams, shift: f64) -> Result<C64> {
    let k = params.kappa;
    let e = 4.0 / k - 0.5;
    let (eta, mu, nu) = (r.eta, r.mu, r.nu());
    let one = C64::new(1.0, 0.0);
    let d = 2.0 * mu.im;
    let m2 = mu.norm_sqr();
    let em2 = (mu - eta).norm_sqr();
    let om2 = (1.0 - mu).norm_sqr();
    let outer = (eta * d).powf(8.0 / k - 1.0) * (1.0 - eta).powf(2.0 / k) / (m2 * em2 * om2).powf(e);
    let (pref, x) = match i {
        1 => (outer, vec![one * (1.0 - eta), one - mu, one - nu]),
        2 => (
            (m2 * d * d).powf(e) * (1.0 - eta).powf(2.0 / k) / (em2 * om2).powf(e),
            vec![one * eta, eta / mu, eta / nu],
        ),
        3 => (
            (eta * eta * om2 * d * d).powf(e) / ((m2 * em2).powf(e) * (1.0 - eta).powf(6.0 / k - 1.0)),
            vec![one * (1.0 - eta), (1.0 - eta) / (one - mu), (1.0 - eta) / (one - nu)],
        ),
        4 => (outer, vec![one * eta, mu, nu]),
        _ => return Err(Error::Domain(format!("rectangle block index {i} outside 1..4"))),
    };
    let b = vec![4.0 / k, 1.0 - 8.0 / k, 1.0 - 8.0 / k];
    Ok(fd(params, shift, b, x)? * pref)
}

/// Rectangle block `G_i` in closed form.
pub fn rect_block_g(i: usize, r: &CrossRatios, params: &ModelParams) -> Result<f64> {
    Ok(rect_block_g_complex(i, r, params)?.re)
}

/// `B^{-1} int_lo^hi prod_j |u - x_j|^{-4/kappa} |u - w|^{2 g} du` along the
/// real axis; `lo = -inf` or `hi = +inf` is allowed (`kappa > 4` then).
pub fn real_line_block(
    points: &[f64],
    w: C64,
    g: f64,
    (lo, hi): (f64, f64),
    params: &ModelParams,
    opts: &QuadOptions,
) -> Result<f64> {
    let k = params.kappa;
    let p = 4.0 / k;
    let reference = if lo.is_infinite() {
        f64::NEG_INFINITY
    } else if hi.is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (lo + hi)
    };
    let mut factors: Vec<Factor> = points
        .iter()
        .map(|&x| {
            let c = C64::new(x, 0.0);
            if x < reference {
                Factor::forward(c, -p)
            } else {
                Factor::backward(c, -p)
            }
        })
        .collect();
    factors.push(Factor::forward(w, g));
    factors.push(Factor::forward(w.conj(), g));
    let f = BranchedIntegrand::new(factors);
    let v = if lo.is_infinite() {
        -integrate_piece(&f, &Piece::Ray { start: C64::new(hi, 0.0), dir: C64::new(-1.0, 0.0) }, opts)?
    } else if hi.is_infinite() {
        integrate_piece(&f, &Piece::Ray { start: C64::new(lo, 0.0), dir: C64::new(1.0, 0.0) }, opts)?
    } else {
        integrate_segment_regularized(&f, C64::new(lo, 0.0), C64::new(hi, 0.0), opts)?
    };
    Ok(screening_norm(k) * v.re)
}

fn segments(points: &[f64]) -> Vec<(f64, f64)> {
    let mut s = vec![(f64::NEG_INFINITY, points[0])];
    s.extend(points.windows(2).map(|w| (w[0], w[1])));
    s.push((points[points.len() - 1], f64::INFINITY));
    s
}

/// Rectangle block `G_i` by direct quadrature of its defining integral.
pub fn rect_block_g_direct(i: usize, r: &CrossRatios, params: &ModelParams, opts: &QuadOptions) -> Result<f64> {
    if !(1..=4).contains(&i) {
        return Err(Error::Domain(format!("rectangle block index {i} outside 1..4")));
    }
    let k = params.kappa;
    let (eta, mu) = (r.eta, r.mu);
    let pts = [0.0, eta, 1.0];
    let pref = (2.0 * mu.im).powf(8.0 / k - 1.0)
        * eta.powf(8.0 / k - 1.0)
        * (1.0 - eta).powf(2.0 / k)
        * (mu.norm() * (mu - eta).norm() * (mu - 1.0).norm()).powf(1.0 - 8.0 / k);
    Ok(pref * real_line_block(&pts, mu, 8.0 / k - 1.0, segments(&pts)[i - 1], params, opts)?)
}

fn hex_block_prefactor(r: &CrossRatios, k: f64) -> Result<f64> {
    let (eta, tau, sigma) = r.hex_parts()?;
    let mu = r.mu;
    Ok((eta * (sigma - tau)).powf(8.0 / k - 1.0)
        * (tau * sigma * (tau - eta) * (sigma - eta) * (1.0 - eta) * (1.0 - tau) * (1.0 - sigma)).powf(2.0 / k)
        * (2.0 * mu.im).powf(24.0 / k - 2.0)
        * hex_bulk_norms(eta, tau, sigma, mu).powf(0.5 - 6.0 / k))
}

/// Hexagon block `H_i` with its imaginary part (zero up to rounding).
pub fn hex_block_h_complex(i: usize, r: &CrossRatios, params: &ModelParams) -> Result<C64> {
    hex_block_h_shifted(i, r, params, 0.0)
}

/// `H_i` with the Lauricella parameter `a` moved by `shift`.
pub fn hex_block_h_shifted(i: usize, r: &CrossRatios, params: &ModelParams, shift: f64) -> Result<C64> {
    let k = params.kappa;
    let (eta, tau, sigma) = r.hex_parts()?;
    let (mu, nu) = (r.mu, r.nu());
    let p = 4.0 / k;
    let q = 12.0 / k - 1.0;
    let one = C64::new(1.0, 0.0);
    let re = |x: f64| one * x;
    let abs2q = |c: C64| c.norm_sqr().powf(q);
    let (pref, x): (f64, Vec<C64>) = match i {
        1 => (1.0, vec![re(1.0 - eta), re(1.0 - tau), re(1.0 - sigma), one - mu, one - nu]),
        2 => (
            eta.powf(1.0 - 2.0 * p) * tau.powf(-p) * sigma.powf(-p) * abs2q(mu),
            vec![re(eta), re(eta / tau), re(eta / sigma), eta / mu, eta / nu],
        ),
        3 => {
            let s = (tau - eta) / tau;
            (
                eta.powf(1.0 - 2.0 * p)
                    * tau.powf(p - 1.0)
                    * (tau - eta).powf(1.0 - 2.0 * p)
                    * (sigma - eta).powf(-p)
                    * (1.0 - eta).powf(-p)
                    * abs2q(mu - eta),
                vec![
                    re(1.0 - eta / tau),
                    re(sigma * s / (sigma - eta)),
                    re(s / (1.0 - eta)),
                    mu * s / (mu - eta),
                    nu * s / (nu - eta),
                ],
            )
        }
        4 => {
            let s = (sigma - tau) / (sigma - eta);
            (
                tau.powf(-p)
                    * (tau - eta).powf(1.0 - 2.0 * p)
                    * (sigma - eta).powf(p - 1.0)
                    * (sigma - tau).powf(1.0 - 2.0 * p)
                    * (1.0 - tau).powf(-p)
                    * abs2q(mu - tau),
                vec![
                    re(s),
                    re(eta * s / tau),
                    re((1.0 - eta) * s / (1.0 - tau)),
                    (mu - eta) * s / (mu - tau),
                    (nu - eta) * s / (nu - tau),
                ],
            )
        }
        5 => {
            let s = 1.0 - sigma;
            (
                (1.0 - eta).powf(-p) * (1.0 - tau).powf(-p) * s.powf(1.0 - 2.0 * p) * abs2q(one - mu),
                vec![re(s), re(s / (1.0 - eta)), re(s / (1.0 - tau)), s / (one - mu), s / (one - nu)],
            )
        }
        6 => (1.0, vec![re(eta), re(tau), re(sigma), mu, nu]),
        _ => return Err(Error::Domain(format!("hexagon block index {i} outside 1..6"))),
    };
    let b = vec![p, p, p, 1.0 - 12.0 / k, 1.0 - 12.0 / k];
    Ok(fd(params, shift, b, x)? * (pref * hex_block_prefactor(r, k)?))
}

/// Hexagon block `H_i` in closed form.
pub fn hex_block_h(i: usize, r: &CrossRatios, params: &ModelParams) -> Result<f64> {
    Ok(hex_block_h_complex(i, r, params)?.re)
}

/// Hexagon block `H_i` by direct quadrature of its defining integral.
pub fn hex_block_h_direct(i: usize, r: &CrossRatios, params: &ModelParams, opts: &QuadOptions) -> Result<f64> {
    if !(1..=6).contains(&i) {
        return Err(Error::Domain(format!("hexagon block index {i} outside 1..6")));
    }
    let k = params.kappa;
    let (eta, tau, sigma) = r.hex_parts()?;
    let pts = [0.0, eta, tau, sigma, 1.0];
    let v = real_line_block(&pts, r.mu, 12.0 / k - 1.0, segments(&pts)[i - 1], params, opts)?;
    Ok(v * hex_block_prefactor(r, k)?)
}

// ---------------------------------------------------------------------------
// Removable singularities
// ---------------------------------------------------------------------------

/// Evaluate `f`, or average it at `kappa +- KAPPA_OFFSET` when
/// `denominator(n)` is too small.
pub fn removable<F>(params: &ModelParams, denominator: fn(f64) -> f64, f: F) -> Result<f64>
where
    F: Fn(&ModelParams) -> Result<f64>,
{
    if denominator(params.fugacity_n).abs() >= REMOVABLE_TOL {
        return f(params);
    }
    let lo = ModelParams::from_kappa(params.kappa - KAPPA_OFFSET)?;
    let hi = ModelParams::from_kappa(params.kappa + KAPPA_OFFSET)?;
    Ok(0.5 * (f(&lo)? + f(&hi)?))
}

fn rect_denominator(n: f64) -> f64 {
    n * n - 4.0
}

fn hex_denominator(n: f64) -> f64 {
    (n * n - 4.0) * (n * n - 1.0)
}

fn combo_denominator(n: f64) -> f64 {
    4.0 - n * n
}

// ---------------------------------------------------------------------------
// Half-plane weights
// ---------------------------------------------------------------------------

/// Rectangle one-pinch weight `Pi_{ij:kl}`.
pub fn rect_one_pp_weight(event: PinchEvent, xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    event.validate()?;
    let [i, j, k, l] =
        event.rect_indices().ok_or_else(|| Error::Domain(format!("{event} is not a rectangle one-pinch event")))?;
    check_config(xs, z, 4)?;
    let r = CrossRatios::from_points(xs, z)?;
    removable(params, rect_denominator, |p| {
        let g: Vec<f64> = (1..=4).map(|m| rect_block_g(m, &r, p)).collect::<Result<_>>()?;
        let g = |m: u8| g[(m - 1) as usize];
        let n = p.fugacity_n;
        let kap = p.kappa;
        let combo = (2.0 * g(j) + (n * n - 2.0) * g(l) - n * g(i) - n * g(k)) / (n * n - 4.0);
        Ok(pair_product(xs).powf(1.0 - 6.0 / kap) * (2.0 * z.im).powf(kap / 8.0 - 1.0) * combo)
    })
}

/// Hexagon two-pinch weight `Pi_{ijkl:mn}`.
pub fn hex_two_pp_weight(event: PinchEvent, xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    event.validate()?;
    let [i, j, k, l, m, nn] =
        event.hex_indices().ok_or_else(|| Error::Domain(format!("{event} is not a hexagon two-pinch event")))?;
    check_config(xs, z, 6)?;
    let r = CrossRatios::from_points(xs, z)?;
    removable(params, hex_denominator, |p| {
        let h: Vec<f64> = (1..=6).map(|a| hex_block_h(a, &r, p)).collect::<Result<_>>()?;
        let h = |a: u8| h[(a - 1) as usize];
        let n = p.fugacity_n;
        let kap = p.kappa;
        let n2 = n * n;
        let combo = (n * (2.0 - n2) * (h(i) + h(m)) + n2 * h(j) - 2.0 * n * h(k) + n2 * h(l) + n2 * (n2 - 3.0) * h(nn))
            / ((n2 - 4.0) * (n2 - 1.0));
        Ok(pair_product(xs).powf(1.0 - 6.0 / kap) * (2.0 * z.im).powf(kap / 8.0 - 6.0 / kap - 1.0) * combo)
    })
}

/// Any computable half-plane weight.
pub fn weight(event: PinchEvent, xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    match event {
        PinchEvent::RectOne(_) => rect_one_pp_weight(event, xs, z, params),
        PinchEvent::RectTwo => weight_full_polygon(2, xs, z, params),
        PinchEvent::HexOneCombo => hex_one_pp_combo(xs, z, params),
        PinchEvent::HexTwo(_) => hex_two_pp_weight(event, xs, z, params),
        PinchEvent::HexThree => weight_full_polygon(3, xs, z, params),
    }
}

// ---------------------------------------------------------------------------
// Hexagon one-pinch combination
// ---------------------------------------------------------------------------

/// Where the first screening contour crosses the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComboRoute {
    /// Through `(x_3, x_4)`.
    Direct,
    /// Through `(x_5, x_6)`, after the loop identity.
    Deformed,
}

fn combo_inner(xs: &[f64], z: C64, k: f64) -> BranchedIntegrand {
    let p = 4.0 / k;
    let g = 8.0 / k - 1.0;
    let mut f: Vec<Factor> = finite_points(xs)
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let c = C64::new(x, 0.0);
            if j < 4 {
                Factor::forward(c, -p)
            } else {
                Factor::backward(c, -p)
            }
        })
        .collect();
    f.push(Factor::forward(z, g));
    f.push(Factor::forward(z.conj(), g));
    BranchedIntegrand::new(f)
}

/// Outer integrand with points of index `< split` ordered before `u_1`.
fn combo_outer(xs: &[f64], z: C64, k: f64, split: usize) -> BranchedIntegrand {
    let p = 4.0 / k;
    let g = 8.0 / k - 1.0;
    let mut f: Vec<Factor> = finite_points(xs)
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let c = C64::new(x, 0.0);
            if j < split {
                Factor::forward(c, -p)
            } else {
                Factor::backward(c, -p)
            }
        })
        .collect();
    f.push(Factor::forward(z, g));
    f.push(Factor::forward(z.conj(), g));
    BranchedIntegrand::new(f)
}

fn combo_double(
    f1: &BranchedIntegrand,
    c1: &ContourSpec,
    f2: &BranchedIntegrand,
    seg: (f64, f64),
    coupling: Coupling,
    k: f64,
    opts: &QuadOptions,
) -> Result<C64> {
    if k > 4.0 {
        double_integral(f1, c1, f2, &ContourSpec::RealSegment(seg.0, seg.1), coupling, opts)
    } else {
        double_integral_continued(f1, c1, f2, (C64::new(seg.0, 0.0), C64::new(seg.1, 0.0)), coupling, opts)
    }
}

/// The double screening integral of the combination, without prefactor.
pub fn combo_integral(xs: &[f64], z: C64, params: &ModelParams, route: ComboRoute, opts: &QuadOptions) -> Result<C64> {
    check_config(xs, z, 6)?;
    let k = params.kappa;
    let f2 = combo_inner(xs, z, k);
    let (split, interval, scale) = match route {
        ComboRoute::Direct => (3, (xs[2], xs[3]), 1.0),
        ComboRoute::Deformed => (5, (xs[4], xs[5]), -1.0),
    };
    let f1 = combo_outer(xs, z, k, split);
    let c1 = ContourSpec::polyline_through(z.conj(), interval, z);
    let coupling = Coupling { exponent: 8.0 / k, scale: C64::new(scale, 0.0) };
    combo_double(&f1, &c1, &f2, (xs[3], xs[4]), coupling, k, opts)
}

/// Orientation sign making the combination positive.
const COMBO_SIGN: f64 = 1.0;

fn combo_prefactor(xs: &[f64], z: C64, params: &ModelParams) -> f64 {
    let k = params.kappa;
    let n = params.fugacity_n;
    let b = screening_norm(k);
    n * (2.0 * z.im).powf(k / 8.0 + 8.0 / k - 2.0)
        * vandermonde(xs, 2.0 / k)
        * bulk_product(xs, z, 1.0 - 8.0 / k)
        * b
        * b
        / (2.0 * (4.0 * PI / k).sin())
}

/// `Pi_{12:34:56} + n Pi_{12:36:45}` with its imaginary part, which vanishes
/// up to quadrature error.
pub fn hex_one_pp_combo_complex(
    xs: &[f64],
    z: C64,
    params: &ModelParams,
    route: ComboRoute,
    opts: &QuadOptions,
) -> Result<C64> {
    let x = combo_integral(xs, z, params, route, opts)?;
    Ok(x / C64::i() * (COMBO_SIGN * combo_prefactor(xs, z, params)))
}

/// `Pi_{12:34:56} + n Pi_{12:36:45}` along a chosen route.
pub fn hex_one_pp_combo_with(
    xs: &[f64],
    z: C64,
    params: &ModelParams,
    route: ComboRoute,
    opts: &QuadOptions,
) -> Result<f64> {
    check_config(xs, z, 6)?;
    removable(params, combo_denominator, |p| Ok(hex_one_pp_combo_complex(xs, z, p, route, opts)?.re))
}

/// `Pi_{12:34:56} + n Pi_{12:36:45}`.
pub fn hex_one_pp_combo(xs: &[f64], z: C64, params: &ModelParams) -> Result<f64> {
    hex_one_pp_combo_with(xs, z, params, ComboRoute::Direct, &QuadOptions::nested())
}

/// Relative size of the loop integral that lets the first contour move from
/// `(x_3, x_4)` to `(x_5, x_6)`: `|sum of sides| / sum |side|`.
pub fn loop_identity_residual(xs: &[f64], z: C64, params: &ModelParams, opts: &QuadOptions) -> Result<f64> {
    check_config(xs, z, 6)?;
    let k = params.kappa;
    let xl = 0.5 * (xs[2] + xs[3]);
    let xr = if xs[5].is_finite() { 0.5 * (xs[4] + xs[5]) } else { xs[4] + 0.5 * (xs[4] - xs[3]) };
    let gap = (xs[3] - xs[2]).min(xs[4] - xs[3]);
    let h = 0.5 * z.im.min(gap);
    let corners = [C64::new(xl, -h), C64::new(xr, -h), C64::new(xr, h), C64::new(xl, h)];
    let f1 = combo_outer(xs, z, k, 5);
    let f2 = combo_inner(xs, z, k);
    let coupling = Coupling { exponent: 8.0 / k, scale: C64::new(-1.0, 0.0) };
    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for s in 0..4 {
        let side = ContourSpec::Chain(vec![Piece::Segment(corners[s], corners[(s + 1) % 4])]);
        let v = combo_double(&f1, &side, &f2, (xs[3], xs[4]), coupling, k, opts)?;
        sum += v;
        scale += v.norm();
    }
    Ok(sum.norm() / scale)
}

// ---------------------------------------------------------------------------
// Contour identities and sum rules
// ---------------------------------------------------------------------------

/// The six screening integrals `I_1..I_6` with `x_5 = z`, `x_6 = conj(z)`,
/// each including `B^{-1}`. Requires `kappa > 4`.
pub fn rect_contour_integrals(xs: &[f64], z: C64, params: &ModelParams, opts: &QuadOptions) -> Result<[C64; 6]> {
    check_config(xs, z, 4)?;
    if xs[3].is_infinite() {
        return Err(Error::Precondition("contour integrals need finite points".into()));
    }
    let k = params.kappa;
    let p = 4.0 / k;
    let g = 8.0 / k - 1.0;
    let zb = z.conj();
    let pts: Vec<C64> = xs.iter().map(|&x| C64::new(x, 0.0)).collect();
    // Points 0..4 real, 4 = z, 5 = conj(z); `forward[j]` picks (u - x_j).
    let build = |forward: [bool; 6]| {
        let all = [pts[0], pts[1], pts[2], pts[3], z, zb];
        let f = (0..6)
            .map(|j| {
                let e = if j < 4 { -p } else { g };
                if forward[j] {
                    Factor::forward(all[j], e)
                } else {
                    Factor::backward(all[j], e)
                }
            })
            .collect();
        BranchedIntegrand::new(f)
    };
    let norm = screening_norm(k);
    let mut out = [C64::new(0.0, 0.0); 6];
    let d = xs[3].max(z.re) + z.im.max(xs[3] - xs[0]);
    let right = ContourSpec::Chain(vec![
        Piece::Segment(zb, C64::new(d, 0.0)),
        Piece::Ray { start: C64::new(d, 0.0), dir: C64::new(1.0, 0.0) },
    ]);
    let left = ContourSpec::Chain(vec![Piece::Ray { start: pts[0], dir: C64::new(-1.0, 0.0) }]);
    out[0] = integrate_contour(&build([true; 6]), &right, opts)? - integrate_contour(&build([false; 6]), &left, opts)?;
    for i in 2..=4 {
        let mut fw = [false; 6];
        for (j, f) in fw.iter_mut().enumerate().take(4) {
            *f = j + 1 < i;
        }
        out[i - 1] = integrate_segment_regularized(&build(fw), pts[i - 2], pts[i - 1], opts)?;
    }
    out[4] = integrate_segment_regularized(&build([true, true, true, true, false, false]), pts[3], z, opts)?;
    let c = C64::new(xs[3].max(z.re) + z.im, 0.0);
    let poly = ContourSpec::Chain(vec![Piece::Segment(z, c), Piece::Segment(c, zb)]);
    out[5] = integrate_contour(&build([true, true, true, true, true, false]), &poly, opts)?;
    Ok(out.map(|v| v * norm))
}

/// Relative residuals of the linear relation among `I_1..I_6` for the
/// contours just above (`+`) and just below (`-`) the real axis.
pub fn linear_relation_residuals(ints: &[C64; 6], params: &ModelParams) -> [f64; 2] {
    let k = params.kappa;
    [1.0, -1.0].map(|s| {
        let w = C64::from_polar(1.0, s * 4.0 * PI / k);
        let terms =
            [ints[0], w * ints[1], w.powi(2) * ints[2], w.powi(3) * ints[3], w.powi(4) * ints[4], -w.powi(2) * ints[5]];
        let sum: C64 = terms.iter().sum();
        sum.norm() / terms.iter().map(|t| t.norm()).sum::<f64>()
    })
}

/// `I_5 - e^{8 pi i / kappa} I_6 + I_1`, real for `x_6 = conj(x_5)`.
pub fn real_basis_first(ints: &[C64; 6], params: &ModelParams) -> C64 {
    ints[4] - C64::from_polar(1.0, 8.0 * PI / params.kappa) * ints[5] + ints[0]
}

/// Both sides of `Pi_{41:23} + n Pi_{12:34} + Pi_{23:41} = n J I_4`.
pub fn rect_sum_rule(xs: &[f64], z: C64, params: &ModelParams, opts: &QuadOptions) -> Result<(f64, f64)> {
    check_config(xs, z, 4)?;
    let n = params.fugacity_n;
    let k = params.kappa;
    let lhs = rect_one_pp_weight(PinchEvent::RectOne(4), xs, z, params)?
        + n * rect_one_pp_weight(PinchEvent::RectOne(1), xs, z, params)?
        + rect_one_pp_weight(PinchEvent::RectOne(2), xs, z, params)?;
    let j = (2.0 * z.im).powf(k / 8.0 + 8.0 / k - 2.0) * vandermonde(xs, 2.0 / k) * bulk_product(xs, z, 1.0 - 8.0 / k);
    let block = real_line_block(xs, z, 8.0 / k - 1.0, (xs[2], xs[3]), params, opts)?;
    Ok((lhs, n * j * block))
}

/// Both sides of `Pi_{6123:45} + n Pi_{1234:56} + Pi_{2345:61} = n L K_6`.
pub fn hex_sum_rule(xs: &[f64], z: C64, params: &ModelParams, opts: &QuadOptions) -> Result<(f64, f64)> {
    check_config(xs, z, 6)?;
    let n = params.fugacity_n;
    let k = params.kappa;
    let lhs = hex_two_pp_weight(PinchEvent::HexTwo(6), xs, z, params)?
        + n * hex_two_pp_weight(PinchEvent::HexTwo(1), xs, z, params)?
        + hex_two_pp_weight(PinchEvent::HexTwo(2), xs, z, params)?;
    let l =
        (2.0 * z.im).powf(k / 8.0 + 18.0 / k - 3.0) * vandermonde(xs, 2.0 / k) * bulk_product(xs, z, 1.0 - 12.0 / k);
    let block = real_line_block(xs, z, 12.0 / k - 1.0, (xs[4], xs[5]), params, opts)?;
    Ok((lhs, n * l * block))
}

// ---------------------------------------------------------------------------
// Partition functions
// ---------------------------------------------------------------------------

fn rect_hyp(m: f64, k: f64) -> Result<f64> {
    gauss_2f1(2.0 - 12.0 / k, 1.0 - 4.0 / k, 2.0 - 8.0 / k, m)
}

/// Rectangle partition function `Upsilon_ffbc^R(m)`.
pub fn partition_ffbc_rect(m: f64, ffbc: u8, params: &ModelParams) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Domain(format!("elliptic parameter {m} outside (0, 1)")));
    }
    let k = params.kappa;
    let n = params.fugacity_n;
    let kp = ellip_k(1.0 - m)?;
    let f = match ffbc {
        1 => rect_hyp(1.0 - m, k)?,
        2 => rect_hyp(m, k)?,
        _ => return Err(Error::Domain(format!("rectangle ffbc index {ffbc} outside 1..2"))),
    };
    Ok(n * n * kp.powf(24.0 / k - 4.0) * f)
}

/// Half-plane crossing weights `(Pi_1, Pi_2)` for four points.
pub fn crossing_weights(xs: &[f64], params: &ModelParams) -> Result<(f64, f64)> {
    if xs.len() != 4 || xs.windows(2).any(|w| !(w[0] < w[1])) || !xs[2].is_finite() {
        return Err(Error::Domain(format!("points {xs:?} are not strictly increasing")));
    }
    let k = params.kappa;
    let c = gamma(12.0 / k - 1.0) * gamma(4.0 / k) * rgamma(8.0 / k) * rgamma(8.0 / k - 1.0);
    let (eta, pref) = if xs[3].is_infinite() {
        ((xs[1] - xs[0]) / (xs[2] - xs[0]), (xs[2] - xs[0]).powf(1.0 - 6.0 / k))
    } else {
        (
            (xs[1] - xs[0]) * (xs[3] - xs[2]) / ((xs[2] - xs[0]) * (xs[3] - xs[1])),
            ((xs[3] - xs[1]) * (xs[2] - xs[0])).powf(1.0 - 6.0 / k),
        )
    };
    let g = |x: f64| -> Result<f64> {
        Ok(x.powf(2.0 / k) * (1.0 - x).powf(1.0 - 6.0 / k) * gauss_2f1(4.0 / k, 1.0 - 4.0 / k, 8.0 / k, x)?)
    };
    Ok((c * pref * g(eta)?, c * pref * g(1.0 - eta)?))
}

/// Half-plane partition function of a rectangle ffbc event. `Pi_1` is the
/// `(14)(23)` connectivity and `Pi_2` the `(12)(34)` one.
pub fn partition_rect_halfplane(xs: &[f64], ffbc: u8, params: &ModelParams) -> Result<f64> {
    let e = FfbcEvent::new(2, ffbc)?;
    let n = params.fugacity_n;
    let (p1, p2) = crossing_weights(xs, params)?;
    let l1 = e.loop_count(&[(1, 4), (2, 3)]) as i32;
    let l2 = e.loop_count(&[(1, 2), (3, 4)]) as i32;
    Ok(n.powi(l1) * p1 + n.powi(l2) * p2)
}

/// Finite endpoint pairs of the two exterior arcs not touching `x_6`,
/// as indices into `(x_1..x_5)`, left pair first.
fn hex_exterior_segments(ffbc: FfbcEvent) -> Result<[(usize, usize); 2]> {
    let mut pairs: Vec<(usize, usize)> = ffbc
        .exterior()
        .into_iter()
        .filter(|&(a, b)| a != 6 && b != 6)
        .map(|(a, b)| ((a.min(b) - 1) as usize, (a.max(b) - 1) as usize))
        .collect();
    pairs.sort();
    if pairs[0].1 > pairs[1].0 {
        return Err(Error::Domain(format!(
            "ffbc event {} has nested exterior arcs; its screening contours would intersect",
            ffbc.index
        )));
    }
    Ok([pairs[0], pairs[1]])
}

/// Half-plane hexagon partition function with `x_6 = inf` already divided
/// out, i.e. `lim x^{6/kappa - 1} Upsilon(x_1..x_5, x)`.
pub fn partition_hex_halfplane(xs5: &[f64], ffbc: FfbcEvent, params: &ModelParams, opts: &QuadOptions) -> Result<f64> {
    if xs5.len() != 5 || xs5.windows(2).any(|w| !(w[0] < w[1])) || xs5.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("points {xs5:?} are not strictly increasing")));
    }
    if ffbc.n_arcs != 3 {
        return Err(Error::Domain("hexagon partition needs a hexagon ffbc event".into()));
    }
    let [(a, b), (c, d)] = hex_exterior_segments(ffbc)?;
    let k = params.kappa;
    let p = 4.0 / k;
    let ordered = |lo: usize| -> BranchedIntegrand {
        BranchedIntegrand::new(
            xs5.iter()
                .enumerate()
                .map(|(j, &x)| {
                    let cx = C64::new(x, 0.0);
                    if j <= lo {
                        Factor::forward(cx, -p)
                    } else {
                        Factor::backward(cx, -p)
                    }
                })
                .collect(),
        )
    };
    let f1 = ordered(a);
    let f2 = ordered(c);
    let coupling = Coupling { exponent: 8.0 / k, scale: C64::new(1.0, 0.0) };
    let c1 = ContourSpec::RealSegment(xs5[a], xs5[b]);
    let v = if k > 4.0 {
        double_integral(&f1, &c1, &f2, &ContourSpec::RealSegment(xs5[c], xs5[d]), coupling, opts)?
    } else {
        double_integral_continued(&f1, &c1, &f2, (C64::new(xs5[c], 0.0), C64::new(xs5[d], 0.0)), coupling, opts)?
    };
    let b = screening_norm(k);
    Ok(params.fugacity_n.powi(3) * b * b * vandermonde(xs5, 2.0 / k) * v.re)
}

fn prevertex_product(pv: [f64; 3]) -> f64 {
    let [m1, m2, m3] = pv;
    m1 * m2 * m3 * (m2 - m1) * (m3 - m1) * (m3 - m2) * (1.0 - m1) * (1.0 - m2) * (1.0 - m3)
}

/// Hexagon partition function `Upsilon_ffbc^H(m_1, m_2, m_3)`.
pub fn partition_ffbc_hex(pv: [f64; 3], ffbc: FfbcEvent, params: &ModelParams, opts: &QuadOptions) -> Result<f64> {
    let [m1, m2, m3] = pv;
    if !(0.0 < m1 && m1 < m2 && m2 < m3 && m3 < 1.0) {
        return Err(Error::Domain(format!("prevertices {pv:?} not strictly ordered in (0, 1)")));
    }
    let k = params.kappa;
    let hp = partition_hex_halfplane(&[0.0, m1, m2, m3, 1.0], ffbc, params, opts)?;
    Ok(prevertex_product(pv).powf((6.0 - k) / (2.0 * k)) * hp)
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

fn rect_interior(geo: &RectGeometry, w: C64) -> Result<()> {
    let d = w.re.min(geo.aspect - w.re).min(w.im).min(1.0 - w.im);
    if !(d > BOUNDARY_CLEARANCE) {
        return Err(Error::Unevaluable(format!("{w} is not strictly inside the rectangle")));
    }
    Ok(())
}

/// Rectangle density evaluator with its partition function cached.
#[derive(Debug, Clone)]
pub struct RectDensity {
    pub event: PinchEvent,
    pub ffbc: FfbcEvent,
    pub geo: RectGeometry,
    pub params: ModelParams,
    coefficient: f64,
    partition: f64,
}

impl RectDensity {
    pub fn new(event: PinchEvent, ffbc: FfbcEvent, geo: RectGeometry, params: &ModelParams) -> Result<RectDensity> {
        if !matches!(event, PinchEvent::RectOne(_) | PinchEvent::RectTwo) {
            return Err(Error::Domain(format!("{event} is not a rectangle event")));
        }
        let coefficient = partition_coefficient(event, ffbc, params)?;
        let partition = partition_ffbc_rect(geo.m, ffbc.index, params)?;
        Ok(RectDensity { event, ffbc, geo, params: *params, coefficient, partition })
    }

    /// Density up to the lattice-dependent constant.
    pub fn density(&self, w: C64) -> Result<f64> {
        rect_interior(&self.geo, w)?;
        let k = self.params.kappa;
        let m = self.geo.m;
        let z = rect_inverse(w, &self.geo)?;
        if !(z.im > 0.0) {
            return Err(Error::Unevaluable(format!("preimage of {w} is on the real axis")));
        }
        let jac = self.geo.inverse_derivative(w)?.norm();
        let xs = [0.0, m, 1.0, f64::INFINITY];
        let pi = weight(self.event, &xs, z, &self.params)?;
        let two_theta = 2.0 * self.params.bulk(self.event.s());
        Ok(jac.powf(two_theta)
            * (m * (1.0 - m)).powf(6.0 / k - 1.0)
            * self.geo.kprime.powf(24.0 / k - 4.0)
            * self.coefficient
            * pi
            / self.partition)
    }

    /// Density divided by its value at the center.
    pub fn normalized(&self, w: C64) -> Result<f64> {
        Ok(self.density(w)? / self.density(self.geo.center())?)
    }
}

/// Rectangle density at `w`.
pub fn density_rect(
    event: PinchEvent,
    ffbc: FfbcEvent,
    geo: &RectGeometry,
    w: C64,
    params: &ModelParams,
) -> Result<f64> {
    RectDensity::new(event, ffbc, *geo, params)?.density(w)
}

/// Rectangle density relative to the center.
pub fn density_rect_normalized(
    event: PinchEvent,
    ffbc: FfbcEvent,
    geo: &RectGeometry,
    w: C64,
    params: &ModelParams,
) -> Result<f64> {
    RectDensity::new(event, ffbc, *geo, params)?.normalized(w)
}

/// Hexagon density evaluator with its partition function cached.
#[derive(Debug, Clone)]
pub struct HexDensity {
    pub event: PinchEvent,
    pub ffbc: FfbcEvent,
    pub geo: HexGeometry,
    pub params: ModelParams,
    pub opts: QuadOptions,
    coefficient: f64,
    partition: f64,
}

impl HexDensity {
    pub fn new(event: PinchEvent, ffbc: FfbcEvent, geo: HexGeometry, params: &ModelParams) -> Result<HexDensity> {
        if event.n_arcs() != 3 {
            return Err(Error::Domain(format!("{event} is not a hexagon event")));
        }
        let opts = QuadOptions::nested();
        let coefficient = partition_coefficient(event, ffbc, params)?;
        let partition = partition_ffbc_hex(geo.prevertices, ffbc, params, &opts)?;
        Ok(HexDensity { event, ffbc, geo, params: *params, opts, coefficient, partition })
    }

    pub fn density(&self, w: C64) -> Result<f64> {
        if !self.geo.contains(w, -BOUNDARY_CLEARANCE) {
            return Err(Error::Unevaluable(format!("{w} is not strictly inside the hexagon")));
        }
        let z = hex_inverse(w, &self.geo)?;
        self.density_at_preimage(z)
    }

    /// Density at the point with half-plane preimage `z`.
    pub fn density_at_preimage(&self, z: C64) -> Result<f64> {
        if !(z.im > 0.0) {
            return Err(Error::Unevaluable(format!("preimage {z} is on the real axis")));
        }
        let k = self.params.kappa;
        let [m1, m2, m3] = self.geo.prevertices;
        let xs = [0.0, m1, m2, m3, 1.0, f64::INFINITY];
        let pi = match self.event {
            PinchEvent::HexOneCombo => hex_one_pp_combo_with(&xs, z, &self.params, ComboRoute::Direct, &self.opts)?,
            e => weight(e, &xs, z, &self.params)?,
        };
        let map = (z * (m1 - z) * (m2 - z) * (m3 - z) * (1.0 - z) * (27.0 / 8.0)).norm();
        let two_theta = 2.0 * self.params.bulk(self.event.s());
        Ok(map.powf(two_theta / 3.0)
            * prevertex_product(self.geo.prevertices).powf((6.0 - k) / (2.0 * k))
            * self.coefficient
            * pi
            / self.partition)
    }

    pub fn normalized(&self, w: C64) -> Result<f64> {
        Ok(self.density(w)? / self.density_at_preimage(self.geo.center_preimage)?)
    }
}

/// Hexagon density at `w`.
pub fn density_hex(event: PinchEvent, ffbc: FfbcEvent, geo: &HexGeometry, w: C64, params: &ModelParams) -> Result<f64> {
    HexDensity::new(event, ffbc, geo.clone(), params)?.density(w)
}

/// Hexagon density relative to the center.
pub fn density_hex_normalized(
    event: PinchEvent,
    ffbc: FfbcEvent,
    geo: &HexGeometry,
    w: C64,
    params: &ModelParams,
) -> Result<f64> {
    HexDensity::new(event, ffbc, geo.clone(), params)?.normalized(w)
}

// ---------------------------------------------------------------------------
// Finite-difference verifiers
// ---------------------------------------------------------------------------

/// Central first and second derivatives, each Richardson-extrapolated.
fn derivs<F: Fn(f64) -> Result<f64>>(f: &F, h: f64, f0: f64) -> Result<(f64, f64)> {
    let (p1, m1) = (f(h)?, f(-h)?);
    let (p2, m2) = (f(0.5 * h)?, f(-0.5 * h)?);
    let d1h = (p1 - m1) / (2.0 * h);
    let d1half = (p2 - m2) / h;
    let d2h = (p1 - 2.0 * f0 + m1) / (h * h);
    let d2half = (p2 - 2.0 * f0 + m2) / (0.25 * h * h);
    Ok(((4.0 * d1half - d1h) / 3.0, (4.0 * d2half - d2h) / 3.0))
}

fn local_scale(xs: &[f64], z: C64) -> f64 {
    let mut s = z.im;
    for w in xs.windows(2) {
        s = s.min(w[1] - w[0]);
    }
    for &x in xs {
        s = s.min((z - x).norm());
    }
    s
}

struct Gradient {
    value: f64,
    dx: Vec<f64>,
    dxx: Vec<f64>,
    dzx: f64,
    dzy: f64,
}

fn gradient<W>(weight: &W, xs: &[f64], z: C64, second: Option<usize>) -> Result<Gradient>
where
    W: Fn(&[f64], C64) -> Result<f64>,
{
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("finite differences need finite points".into()));
    }
    let h = 1e-2 * local_scale(xs, z);
    let value = weight(xs, z)?;
    let mut dx = vec![0.0; xs.len()];
    let mut dxx = vec![0.0; xs.len()];
    for i in 0..xs.len() {
        let shift = |t: f64| {
            let mut ys = xs.to_vec();
            ys[i] += t;
            weight(&ys, z)
        };
        let (d1, d2) = derivs(&shift, h, value)?;
        dx[i] = d1;
        if second == Some(i) {
            dxx[i] = d2;
        }
    }
    let (dzx, _) = derivs(&|t: f64| weight(xs, z + t), h, value)?;
    let (dzy, _) = derivs(&|t: f64| weight(xs, z + C64::new(0.0, t)), h, value)?;
    Ok(Gradient { value, dx, dxx, dzx, dzy })
}

fn relative(terms: &[f64]) -> f64 {
    let total: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / total
}

/// Relative residual of the `i`-th (0-based) null-state PDE for a weight of
/// bulk type `s`.
pub fn verify_null_state<W>(weight: W, xs: &[f64], z: C64, i: usize, params: &ModelParams, s: u32) -> Result<f64>
where
    W: Fn(&[f64], C64) -> Result<f64>,
{
    if i >= xs.len() {
        return Err(Error::Precondition(format!("PDE index {i} outside the point list")));
    }
    let g = gradient(&weight, xs, z, Some(i))?;
    let theta1 = params.theta1;
    let big = params.bulk(s);
    let xi = xs[i];
    let mut terms = vec![params.kappa / 4.0 * g.dxx[i]];
    for (j, &xj) in xs.iter().enumerate() {
        if j != i {
            terms.push(g.dx[j] / (xj - xi));
            terms.push(-theta1 / (xj - xi).powi(2) * g.value);
        }
    }
    let dz = C64::new(g.dzx, -g.dzy);
    terms.push((dz / (z - xi)).re);
    terms.push(-2.0 * big * (1.0 / (z - xi).powi(2)).re * g.value);
    Ok(relative(&terms))
}

/// Relative residuals of the translation, dilation and special conformal
/// Ward identities.
pub fn verify_ward<W>(weight: W, xs: &[f64], z: C64, params: &ModelParams, s: u32) -> Result<[f64; 3]>
where
    W: Fn(&[f64], C64) -> Result<f64>,
{
    let g = gradient(&weight, xs, z, None)?;
    let theta1 = params.theta1;
    let big = params.bulk(s);
    let mut t = vec![g.dzx];
    t.extend(g.dx.iter().copied());
    let mut d = vec![z.re * g.dzx + z.im * g.dzy, 2.0 * big * g.value];
    for (k, &x) in xs.iter().enumerate() {
        d.push(x * g.dx[k]);
        d.push(theta1 * g.value);
    }
    let dz = C64::new(g.dzx, -g.dzy);
    let mut sc = vec![(z * z * dz).re, 4.0 * big * z.re * g.value];
    for (k, &x) in xs.iter().enumerate() {
        sc.push(x * x * g.dx[k]);
        sc.push(2.0 * theta1 * x * g.value);
    }
    Ok([relative(&t), relative(&d), relative(&sc)])
}
