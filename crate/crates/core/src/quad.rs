//! Quadrature for branched power-product integrands.
//!
//! An integrand is a product of factors `(scale * (u - p))^beta` on the
//! principal branch, times an optional smooth multiplier. Contours are chains
//! of straight segments and rays to infinity. Factors whose branch point sits
//! at a piece endpoint are absorbed into Gauss-Jacobi weights; everything else
//! is handled by globally adaptive bisection with a depth cap.
//!
//! Orientation of each difference (the sign or phase carried in `scale`) is
//! fixed by [`ordered_factors`] from the declared order of the branch points
//! relative to a reference crossing point, so that the integrand is real and
//! positive there.

use crate::{Error, Result, C64};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

/// One factor `(scale * (u - point))^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub point: C64,
    pub exponent: f64,
    pub scale: C64,
}

impl Factor {
    /// `(u - point)^exponent`.
    pub fn forward(point: C64, exponent: f64) -> Factor {
        Factor { point, exponent, scale: C64::new(1.0, 0.0) }
    }

    /// `(point - u)^exponent`.
    pub fn backward(point: C64, exponent: f64) -> Factor {
        Factor { point, exponent, scale: C64::new(-1.0, 0.0) }
    }

    #[inline]
    pub fn ln_value(&self, u: C64) -> C64 {
        (self.scale * (u - self.point)).ln() * self.exponent
    }
}

/// Smooth multiplier attached to an integrand.
pub type Smooth = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// Product of power factors with a constant and an optional smooth part.
#[derive(Clone)]
pub struct BranchedIntegrand {
    pub factors: Vec<Factor>,
    pub constant: C64,
    pub extra: Option<Smooth>,
}

impl std::fmt::Debug for BranchedIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BranchedIntegrand")
            .field("factors", &self.factors)
            .field("constant", &self.constant)
            .field("extra", &self.extra.is_some())
            .finish()
    }
}

impl BranchedIntegrand {
    pub fn new(factors: Vec<Factor>) -> Self {
        BranchedIntegrand { factors, constant: C64::new(1.0, 0.0), extra: None }
    }

    pub fn with_extra(mut self, extra: Smooth) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn with_constant(mut self, c: C64) -> Self {
        self.constant = c;
        self
    }

    pub fn push(&mut self, f: Factor) {
        self.factors.push(f);
    }

    /// Direct evaluation at `u`.
    pub fn eval(&self, u: C64) -> C64 {
        let mut lg = C64::new(0.0, 0.0);
        for f in &self.factors {
            lg += f.ln_value(u);
        }
        let mut v = self.constant * lg.exp();
        if let Some(e) = &self.extra {
            v *= e(u);
        }
        v
    }

    /// Sum of all exponents; the integrand behaves like `|u|^total` at infinity.
    pub fn total_exponent(&self) -> f64 {
        self.factors.iter().map(|f| f.exponent).sum()
    }
}

/// A branch point declared with its position in the real ordering used by
/// the ordering operator. Real points use their own abscissa; a bulk point
/// and its image may be placed anywhere in the order.
#[derive(Debug, Clone, Copy)]
pub struct OrderedPoint {
    pub point: C64,
    pub exponent: f64,
    pub position: f64,
}

impl OrderedPoint {
    pub fn real(x: f64, exponent: f64) -> Self {
        OrderedPoint { point: C64::new(x, 0.0), exponent, position: x }
    }
    pub fn at(point: C64, exponent: f64, position: f64) -> Self {
        OrderedPoint { point, exponent, position }
    }
}

/// The ordering table: `(u - p)` for points ordered before `reference`,
/// `(p - u)` for points after it. With this choice every factor is positive
/// when `u` is real and sits at `reference`.
pub fn ordered_factors(points: &[OrderedPoint], reference: f64) -> Vec<Factor> {
    points
        .iter()
        .map(|p| {
            if p.position < reference {
                Factor::forward(p.point, p.exponent)
            } else {
                Factor::backward(p.point, p.exponent)
            }
        })
        .collect()
}

/// Piece of a contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment(C64, C64),
    /// `start + dir * r` for `r` in `[0, inf)`.
    Ray {
        start: C64,
        dir: C64,
    },
}

/// Contour kinds used by the theory module.
#[derive(Debug, Clone, PartialEq)]
pub enum ContourSpec {
    RealSegment(f64, f64),
    /// From `zbar` through a real crossing point to `z`.
    ComplexPolyline {
        zbar: C64,
        crossing: f64,
        z: C64,
    },
    Pochhammer(f64, f64),
    /// Arbitrary chain of pieces (used for loops and paths to infinity).
    Chain(Vec<Piece>),
}

impl ContourSpec {
    /// Polyline from `zbar` to `z` crossing the axis at the midpoint of
    /// `(lo, hi)`; an infinite `hi` crosses one unit (scaled) past `lo`.
    pub fn polyline_through(zbar: C64, interval: (f64, f64), z: C64) -> ContourSpec {
        let (lo, hi) = interval;
        let crossing = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0f64.max((z.re - lo).abs() + z.im) };
        ContourSpec::ComplexPolyline { zbar, crossing, z }
    }

    pub fn pieces(&self) -> Vec<Piece> {
        match self {
            ContourSpec::RealSegment(a, b) | ContourSpec::Pochhammer(a, b) => {
                vec![Piece::Segment(C64::new(*a, 0.0), C64::new(*b, 0.0))]
            }
            ContourSpec::ComplexPolyline { zbar, crossing, z } => {
                let c = C64::new(*crossing, 0.0);
                vec![Piece::Segment(*zbar, c), Piece::Segment(c, *z)]
            }
            ContourSpec::Chain(p) => p.clone(),
        }
    }
}

/// Tolerances and limits.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Bisection depth cap; panels at this depth are not refined further.
    pub max_depth: u32,
    pub max_panels: usize,
    /// Gauss order of the coarse rule; the fine rule uses twice as many nodes.
    pub order: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-8, abs_tol: 1e-300, max_depth: 40, max_panels: 4000, order: 10 }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, t: f64) -> Self {
        self.rel_tol = t;
        self
    }
    /// Nested two-dimensional default.
    pub fn nested() -> Self {
        QuadOptions { rel_tol: 1e-6, ..Default::default() }
    }
}

// ---------------------------------------------------------------------------
// Gauss-Jacobi rules
// ---------------------------------------------------------------------------

/// Nodes and weights on `[-1, 1]` for the weight `(1-x)^a (1+x)^b`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static RwLock<HashMap<RuleKey, Arc<Rule>>> {
    static CACHE: OnceLock<RwLock<HashMap<RuleKey, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached Gauss-Jacobi rule with `n` nodes.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Arc<Rule> {
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(r) = rule_cache().read().unwrap().get(&key) {
        return r.clone();
    }
    let r = Arc::new(golub_welsch(n, a, b));
    rule_cache().write().unwrap().insert(key, r.clone());
    r
}

fn golub_welsch(n: usize, a: f64, b: f64) -> Rule {
    assert!(a > -1.0 && b > -1.0 && n >= 1);
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        let t = 2.0 * kf + ab;
        diag[k] = if k == 0 { (b - a) / (ab + 2.0) } else { (b * b - a * a) / (t * (t + 2.0)) };
        if k >= 1 {
            off[k] = if k == 1 {
                (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))).sqrt()
            } else {
                (4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (t * t * (t + 1.0) * (t - 1.0))).sqrt()
            };
        }
    }
    let (vals, first) = tridiag_eigen(&diag, &off);
    let mu0 = 2f64.powf(ab + 1.0)
        * (crate::specfun::ln_gamma(a + 1.0) + crate::specfun::ln_gamma(b + 1.0) - crate::specfun::ln_gamma(ab + 2.0))
            .exp();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    Rule {
        nodes: idx.iter().map(|&i| vals[i]).collect(),
        weights: idx.iter().map(|&i| mu0 * first[i] * first[i]).collect(),
    }
}

/// Implicit QL on a symmetric tridiagonal matrix; returns eigenvalues and the
/// first component of each normalized eigenvector.
fn tridiag_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..(n - 1)].copy_from_slice(&off[1..n]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

// ---------------------------------------------------------------------------
// Adaptive Jacobi-weighted integration on [0, 1]
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Panel {
    l: f64,
    r: f64,
    depth: u32,
    est: C64,
    err: f64,
}

/// `int_0^1 s^alpha (1-s)^beta g(s) ds` by adaptive bisection. Only the
/// panels touching 0 or 1 carry the Jacobi weight; interior panels multiply
/// it in explicitly.
pub fn adaptive_jacobi<G>(g: &G, alpha: f64, beta: f64, opts: &QuadOptions) -> Result<C64>
where
    G: Fn(f64) -> C64 + ?Sized,
{
    adaptive_jacobi_split(&|s: f64, _: f64| g(s), alpha, beta, opts)
}

/// As [`adaptive_jacobi`], with `g(s, 1 - s)` given the complement computed
/// without cancellation near `s = 1`.
fn adaptive_jacobi_split<G>(g: &G, alpha: f64, beta: f64, opts: &QuadOptions) -> Result<C64>
where
    G: Fn(f64, f64) -> C64 + ?Sized,
{
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::Precondition(format!(
            "endpoint exponents ({alpha}, {beta}) must exceed -1; use the regularized route"
        )));
    }
    let eval_panel = |l: f64, r: f64| -> (C64, f64) {
        let left = l == 0.0;
        let right = r == 1.0;
        let a_w = if left { alpha } else { 0.0 };
        let b_w = if right { beta } else { 0.0 };
        let half = 0.5 * (r - l);
        let jac = half.powf(a_w + b_w + 1.0);
        let mut q = [C64::new(0.0, 0.0); 2];
        for (k, n) in [opts.order, 2 * opts.order].into_iter().enumerate() {
            // Jacobi weight (1-x)^b_w (1+x)^a_w
            let rule = gauss_jacobi(n, b_w, a_w);
            let mut acc = C64::new(0.0, 0.0);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = l + half * (1.0 + x);
                let t = (1.0 - r) + half * (1.0 - x);
                let mut v = g(s, t);
                if !left && alpha != 0.0 {
                    v *= s.powf(alpha);
                }
                if !right && beta != 0.0 {
                    v *= t.powf(beta);
                }
                acc += v * *w;
            }
            q[k] = acc * jac;
        }
        let err = (q[1] - q[0]).norm();
        (q[1], if err.is_nan() { f64::INFINITY } else { err })
    };

    let mut panels: Vec<Panel> = Vec::new();
    for (l, r) in [(0.0, 0.5), (0.5, 1.0)] {
        let (est, err) = eval_panel(l, r);
        panels.push(Panel { l, r, depth: 1, est, err });
    }
    loop {
        let total: C64 = panels.iter().map(|p| p.est).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Numeric("non-finite integrand value".into()));
        }
        let target = (opts.rel_tol * total.norm()).max(opts.abs_tol);
        if err <= target {
            return Ok(total);
        }
        // Refine the worst panel that can still be split.
        let mut worst: Option<usize> = None;
        for (i, p) in panels.iter().enumerate() {
            if p.depth >= opts.max_depth {
                continue;
            }
            if worst.is_none_or(|w| p.err > panels[w].err) {
                worst = Some(i);
            }
        }
        let Some(w) = worst else {
            return Err(Error::Unevaluable(format!(
                "subdivision depth cap {} reached with error {err:.3e} (target {target:.3e})",
                opts.max_depth
            )));
        };
        let capped_err: f64 = panels.iter().filter(|p| p.depth >= opts.max_depth).map(|p| p.err).sum();
        if capped_err > target {
            return Err(Error::Unevaluable(format!(
                "subdivision depth cap {} reached near a singularity",
                opts.max_depth
            )));
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Numeric(format!("panel budget exhausted with error {err:.3e} (target {target:.3e})")));
        }
        let p = panels.swap_remove(w);
        let m = 0.5 * (p.l + p.r);
        for (l, r) in [(p.l, m), (m, p.r)] {
            let (est, err) = eval_panel(l, r);
            panels.push(Panel { l, r, depth: p.depth + 1, est, err });
        }
    }
}

// ---------------------------------------------------------------------------
// Piece integration
// ---------------------------------------------------------------------------

fn coincide(p: C64, q: C64, scale: f64) -> bool {
    (p - q).norm() <= 1e-13 * scale.max(1.0)
}

/// Integral of `f` along one piece.
pub fn integrate_piece(f: &BranchedIntegrand, piece: &Piece, opts: &QuadOptions) -> Result<C64> {
    match *piece {
        Piece::Segment(a, b) => integrate_segment_c(f, a, b, opts),
        Piece::Ray { start, dir } => integrate_ray(f, start, dir, opts),
    }
}

/// Straight segment from `a` to `b` in the complex plane.
pub fn integrate_segment_c(f: &BranchedIntegrand, a: C64, b: C64, opts: &QuadOptions) -> Result<C64> {
    let len = b - a;
    if len.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let scale = a.norm().max(b.norm());
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut lconst = C64::new(0.0, 0.0);
    let mut inner: Vec<Factor> = Vec::with_capacity(f.factors.len());
    for fac in &f.factors {
        if coincide(fac.point, a, scale) {
            alpha += fac.exponent;
            lconst += (fac.scale * len).ln() * fac.exponent;
        } else if coincide(fac.point, b, scale) {
            beta += fac.exponent;
            lconst += (fac.scale * (-len)).ln() * fac.exponent;
        } else {
            inner.push(*fac);
        }
    }
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::Precondition(format!(
            "endpoint exponent {} <= -1: use pochhammer_integral",
            alpha.min(beta)
        )));
    }
    let pre = f.constant * lconst.exp() * len;
    let extra = f.extra.clone();
    // Offsets from both endpoints, so factors close to an endpoint keep
    // their relative accuracy.
    let offsets: Vec<(C64, C64, C64, f64)> =
        inner.iter().map(|fac| (a - fac.point, b - fac.point, fac.scale, fac.exponent)).collect();
    let g = move |s: f64, t: f64| -> C64 {
        let mut lg = C64::new(0.0, 0.0);
        for &(da, db, scale, e) in &offsets {
            let d = if s <= 0.5 { da + len * s } else { db - len * t };
            lg += (scale * d).ln() * e;
        }
        let mut v = lg.exp();
        if let Some(e) = &extra {
            v *= e(a + len * s);
        }
        v
    };
    Ok(pre * adaptive_jacobi_split(&g, alpha, beta, opts)?)
}

/// Ray from `start` to infinity along `dir`.
fn integrate_ray(f: &BranchedIntegrand, start: C64, dir: C64, opts: &QuadOptions) -> Result<C64> {
    let dir = dir / dir.norm();
    let scale = start.norm();
    let total = f.total_exponent();
    let gamma = -total - 2.0;
    if gamma <= -1.0 {
        return Err(Error::Numeric(format!("integrand decays like |u|^{total:.4} at infinity; not integrable")));
    }
    let mut alpha = 0.0;
    let mut lconst = C64::new(0.0, 0.0);
    let mut inner: Vec<Factor> = Vec::with_capacity(f.factors.len());
    for fac in &f.factors {
        if coincide(fac.point, start, scale) {
            alpha += fac.exponent;
            lconst += (fac.scale * dir).ln() * fac.exponent;
        } else {
            inner.push(*fac);
        }
    }
    if alpha <= -1.0 {
        return Err(Error::Precondition("ray start exponent <= -1".into()));
    }
    let pre = f.constant * lconst.exp() * dir;
    let extra = f.extra.clone();
    // Remaining power of (1-s) after extracting s^alpha (1-s)^gamma.
    let rest = total - alpha;
    let g = move |s: f64| -> C64 {
        let t = 1.0 - s;
        let u = start + dir * (s / t);
        let mut lg = C64::new(rest * t.ln(), 0.0);
        for fac in &inner {
            lg += fac.ln_value(u);
        }
        // (1-s)^{-alpha} from the start factor and (1-s)^{-2} from du,
        // against (1-s)^{-gamma} = (1-s)^{total+2} extracted as weight.
        let mut v = lg.exp();
        if let Some(e) = &extra {
            v *= e(u);
        }
        v
    };
    Ok(pre * adaptive_jacobi(&g, alpha, gamma, opts)?)
}

/// Integral along a contour. Complex polylines are checked for clearance
/// from branch points and for crossing the axis strictly inside their
/// declared interval when one is supplied.
pub fn integrate_contour(f: &BranchedIntegrand, c: &ContourSpec, opts: &QuadOptions) -> Result<C64> {
    let pieces = c.pieces();
    check_clearance(f, &pieces)?;
    let mut acc = C64::new(0.0, 0.0);
    for p in &pieces {
        acc += integrate_piece(f, p, opts)?;
    }
    Ok(acc)
}

/// Minimum allowed distance between a contour and a branch point that is not
/// one of its endpoints, relative to the contour size.
pub const EPS_GEOM: f64 = 1e-9;

fn check_clearance(f: &BranchedIntegrand, pieces: &[Piece]) -> Result<()> {
    let start = match pieces.first() {
        Some(Piece::Segment(a, _)) | Some(Piece::Ray { start: a, .. }) => *a,
        None => return Ok(()),
    };
    let end = match pieces.last() {
        Some(Piece::Segment(_, b)) => Some(*b),
        _ => None,
    };
    for piece in pieces {
        let (a, b) = match *piece {
            Piece::Segment(a, b) => (a, b),
            Piece::Ray { .. } => continue,
        };
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let scale = a.norm().max(b.norm()).max(len);
        for fac in &f.factors {
            if coincide(fac.point, start, scale) || end.is_some_and(|e| coincide(fac.point, e, scale)) {
                continue;
            }
            let d = dist_to_segment(fac.point, a, b);
            if d < EPS_GEOM * scale {
                return Err(Error::Geometry(format!("contour passes within {d:.2e} of branch point {}", fac.point)));
            }
        }
    }
    Ok(())
}

fn dist_to_segment(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = ((p - a) * ab.conj()).re / ab.norm_sqr();
    let t = t.clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Integral over the complex polyline from `zbar` to `z`.
pub fn integrate_complex_polyline(f: &BranchedIntegrand, path: &ContourSpec, opts: &QuadOptions) -> Result<C64> {
    match path {
        ContourSpec::ComplexPolyline { zbar, crossing, z } => {
            if (z - zbar).norm() == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            if z.im * zbar.im > 0.0 {
                return Err(Error::Geometry("polyline endpoints must lie on opposite sides of the axis".into()));
            }
            let _ = crossing;
            integrate_contour(f, path, opts)
        }
        _ => Err(Error::Geometry("expected a complex polyline".into())),
    }
}

/// Integral over the real segment `[a, b]` with endpoint exponents `alpha`
/// at `a` and `beta` at `b` applied explicitly: `f` must not contain factors
/// at the endpoints.
pub fn integrate_singular_segment(
    f: &BranchedIntegrand,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    opts: &QuadOptions,
) -> Result<C64> {
    let mut g = f.clone();
    g.push(Factor::forward(C64::new(a, 0.0), alpha));
    g.push(Factor::backward(C64::new(b, 0.0), beta));
    integrate_segment_c(&g, C64::new(a, 0.0), C64::new(b, 0.0), opts)
}

// ---------------------------------------------------------------------------
// Regularized segments and Pochhammer contours
// ---------------------------------------------------------------------------

/// Binomial series of `(1 + r s)^beta` up to `n` terms.
fn binomial_series(beta: f64, r: C64, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut coef = 1.0;
    let mut pw = C64::new(1.0, 0.0);
    for (k, slot) in c.iter_mut().enumerate() {
        *slot = pw * coef;
        coef *= (beta - k as f64) / (k as f64 + 1.0);
        pw *= r;
    }
    c
}

fn series_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        if a[i] == C64::new(0.0, 0.0) {
            continue;
        }
        for j in 0..(n - i) {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// `int_0^delta s^alpha G(s) ds` by termwise integration of the Taylor
/// series of `G`, analytically continued in `alpha`.
fn endpoint_series(factors: &[Factor], origin: C64, dir: C64, alpha: f64, delta: f64) -> Result<C64> {
    const TERMS: usize = 80;
    let mut series = vec![C64::new(0.0, 0.0); TERMS];
    series[0] = C64::new(1.0, 0.0);
    let mut lbase = C64::new(0.0, 0.0);
    for fac in factors {
        let d0 = origin - fac.point;
        lbase += (fac.scale * d0).ln() * fac.exponent;
        let r = dir / d0;
        if r.norm() * delta > 0.75 {
            return Err(Error::Numeric("series radius too small for endpoint continuation".into()));
        }
        series = series_mul(&series, &binomial_series(fac.exponent, r, TERMS));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (k, c) in series.iter().enumerate() {
        let p = alpha + k as f64 + 1.0;
        if p.abs() < 1e-12 {
            return Err(Error::Numeric("integer endpoint exponent; continuation has a pole".into()));
        }
        acc += c * (delta.powf(p) / p);
    }
    Ok(lbase.exp() * acc)
}

/// Straight segment `a -> b` with arbitrary non-integer endpoint exponents,
/// defined by analytic continuation in those exponents. Reduces to the
/// ordinary integral when both exceed -1. `f` must be a pure power product.
pub fn integrate_segment_regularized(f: &BranchedIntegrand, a: C64, b: C64, opts: &QuadOptions) -> Result<C64> {
    if f.extra.is_some() {
        return Err(Error::Precondition("regularized segments need a pure power product".into()));
    }
    let len = b - a;
    let scale = a.norm().max(b.norm()).max(len.norm());
    let (mut alpha, mut beta) = (0.0, 0.0);
    let mut at_a = Vec::new();
    let mut at_b = Vec::new();
    let mut others = Vec::new();
    for fac in &f.factors {
        if coincide(fac.point, a, scale) {
            alpha += fac.exponent;
            at_a.push(*fac);
        } else if coincide(fac.point, b, scale) {
            beta += fac.exponent;
            at_b.push(*fac);
        } else {
            others.push(*fac);
        }
    }
    if alpha > -1.0 && beta > -1.0 {
        return integrate_segment_c(f, a, b, opts);
    }
    // Distance (in units of s) to the nearest other branch point.
    let mut radius = f64::INFINITY;
    for fac in &others {
        radius = radius.min((fac.point - a).norm() / len.norm()).min((fac.point - b).norm() / len.norm());
    }
    let delta = (0.25f64).min(0.4 * radius);
    let mut total = C64::new(0.0, 0.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    if alpha <= -1.0 {
        // Left end: s^alpha times everything else, expanded about a.
        let mut facs: Vec<Factor> = others.clone();
        facs.extend(at_b.iter().copied());
        let mut lconst = C64::new(0.0, 0.0);
        for fa in &at_a {
            lconst += (fa.scale * len).ln() * fa.exponent;
        }
        // In the variable s: (u - p) = (a - p) (1 + s len/(a - p)).
        let v = endpoint_series(&facs, a, len, alpha, delta)?;
        total += lconst.exp() * v * len;
        lo = delta;
    }
    if beta <= -1.0 {
        let mut facs: Vec<Factor> = others.clone();
        facs.extend(at_a.iter().copied());
        let mut lconst = C64::new(0.0, 0.0);
        for fb in &at_b {
            lconst += (fb.scale * (-len)).ln() * fb.exponent;
        }
        // Expand about b in the variable t = 1 - s, u = b - t len.
        let v = endpoint_series(&facs, b, -len, beta, delta)?;
        total += lconst.exp() * v * len;
        hi = 1.0 - delta;
    }
    let ua = a + len * lo;
    let ub = a + len * hi;
    let mut mid = BranchedIntegrand::new(f.factors.clone());
    mid.constant = C64::new(1.0, 0.0);
    total += integrate_segment_c(&mid, ua, ub, opts)?;
    Ok(f.constant * total)
}

/// Radius (in units of `|len|`) of the disc about `origin` on which a factor
/// stays on one branch.
fn analytic_radius(fac: &Factor, origin: C64, len: f64) -> f64 {
    let w0 = fac.scale * (origin - fac.point);
    let r = if w0.re > 0.0 { w0.norm() } else { w0.im.abs() };
    r / (fac.scale.norm() * len)
}

/// `int_0^delta s^alpha G(s) ds` continued in `alpha`, with the Taylor
/// coefficients of `G` taken from samples on a circle of radius `rho`.
fn continued_endpoint<G: Fn(C64) -> C64>(g: &G, alpha: f64, rho: f64, delta: f64) -> Result<C64> {
    const SAMPLES: usize = 128;
    const TERMS: usize = 64;
    let samples: Vec<C64> =
        (0..SAMPLES).map(|j| g(C64::from_polar(rho, 2.0 * PI * j as f64 / SAMPLES as f64))).collect();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..TERMS {
        let mut c = C64::new(0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            c += v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / SAMPLES as f64);
        }
        c /= SAMPLES as f64 * rho.powi(k as i32);
        let p = alpha + k as f64 + 1.0;
        if p.abs() < 1e-12 {
            return Err(Error::Numeric("integer endpoint exponent; continuation has a pole".into()));
        }
        acc += c * (delta.powf(p) / p);
    }
    Ok(acc)
}

/// Segment `a -> b` with endpoint exponents possibly `<= -1`, continued in
/// those exponents, for integrands that may carry a smooth part. The smooth
/// part must be analytic within `smooth_radius` of each singular endpoint.
pub fn integrate_segment_continued(
    f: &BranchedIntegrand,
    a: C64,
    b: C64,
    smooth_radius: f64,
    opts: &QuadOptions,
) -> Result<C64> {
    let len = b - a;
    let l = len.norm();
    let scale = a.norm().max(b.norm()).max(l);
    let alpha: f64 = f.factors.iter().filter(|x| coincide(x.point, a, scale)).map(|x| x.exponent).sum();
    let beta: f64 = f.factors.iter().filter(|x| coincide(x.point, b, scale)).map(|x| x.exponent).sum();
    if alpha > -1.0 && beta > -1.0 {
        return integrate_segment_c(f, a, b, opts);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut total = C64::new(0.0, 0.0);
    for (origin, dir, expo, at_start) in [(a, len, alpha, true), (b, -len, beta, false)] {
        if expo > -1.0 {
            continue;
        }
        let mut rho: f64 = 0.4;
        let mut lconst = C64::new(0.0, 0.0);
        let mut rest = Vec::new();
        for fac in &f.factors {
            if coincide(fac.point, origin, scale) {
                lconst += (fac.scale * dir).ln() * fac.exponent;
            } else {
                rho = rho.min(0.8 * analytic_radius(fac, origin, l));
                rest.push(*fac);
            }
        }
        rho = rho.min(0.8 * smooth_radius / l);
        let extra = f.extra.clone();
        let g = |s: C64| -> C64 {
            let u = origin + dir * s;
            let mut lg = C64::new(0.0, 0.0);
            for fac in &rest {
                lg += fac.ln_value(u);
            }
            let mut v = lg.exp();
            if let Some(e) = &extra {
                v *= e(u);
            }
            v
        };
        let delta = 0.5 * rho;
        total += lconst.exp() * continued_endpoint(&g, expo, rho, delta)? * len;
        if at_start {
            lo = delta;
        } else {
            hi = 1.0 - delta;
        }
    }
    let mid = BranchedIntegrand { constant: C64::new(1.0, 0.0), ..f.clone() };
    total += integrate_segment_c(&mid, a + len * lo, a + len * hi, opts)?;
    Ok(f.constant * total)
}

/// Pochhammer contour around the endpoints `a < b` of a real segment. The
/// result is `4 e^{i pi (b1 - b2)} sin(pi b1) sin(pi b2)` times the
/// (continued) segment integral, where `b1`, `b2` are the endpoint exponents.
pub fn pochhammer_integral(f: &BranchedIntegrand, a: f64, b: f64, opts: &QuadOptions) -> Result<C64> {
    let (ca, cb) = (C64::new(a, 0.0), C64::new(b, 0.0));
    let scale = a.abs().max(b.abs()).max(b - a);
    let b1: f64 = f.factors.iter().filter(|x| coincide(x.point, ca, scale)).map(|x| x.exponent).sum();
    let b2: f64 = f.factors.iter().filter(|x| coincide(x.point, cb, scale)).map(|x| x.exponent).sum();
    let seg = integrate_segment_regularized(f, ca, cb, opts)?;
    Ok(pochhammer_factor(b1, b2) * seg)
}

/// `4 e^{i pi (b1 - b2)} sin(pi b1) sin(pi b2)`.
pub fn pochhammer_factor(b1: f64, b2: f64) -> C64 {
    C64::from_polar(4.0 * (PI * b1).sin() * (PI * b2).sin(), PI * (b1 - b2))
}

// ---------------------------------------------------------------------------
// Double integrals
// ---------------------------------------------------------------------------

/// Coupling `(scale * (u2 - u1))^exponent` between the two variables.
#[derive(Debug, Clone, Copy)]
pub struct Coupling {
    pub exponent: f64,
    pub scale: C64,
}

/// `int_{c1} du1 f1(u1) int_{c2} du2 f2(u2) (scale (u2 - u1))^g`, iterated.
pub fn double_integral(
    f1: &BranchedIntegrand,
    c1: &ContourSpec,
    f2: &BranchedIntegrand,
    c2: &ContourSpec,
    coupling: Coupling,
    opts: &QuadOptions,
) -> Result<C64> {
    let p1 = c1.pieces();
    let p2 = c2.pieces();
    for a in &p1 {
        for b in &p2 {
            if pieces_intersect(a, b) {
                return Err(Error::Geometry("integration contours intersect".into()));
            }
        }
    }
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 1e-2, ..*opts };
    let f2 = f2.clone();
    let failure: Arc<RwLock<Option<Error>>> = Arc::new(RwLock::new(None));
    let fail = failure.clone();
    let inner = move |u1: C64| -> C64 {
        let mut g = f2.clone();
        g.push(Factor { point: u1, exponent: coupling.exponent, scale: coupling.scale });
        let mut acc = C64::new(0.0, 0.0);
        for p in &p2 {
            match integrate_piece(&g, p, &inner_opts) {
                Ok(v) => acc += v,
                Err(e) => {
                    *fail.write().unwrap() = Some(e);
                    return C64::new(f64::NAN, f64::NAN);
                }
            }
        }
        acc
    };
    let mut outer = f1.clone();
    outer.extra = Some(match f1.extra.clone() {
        Some(e) => Arc::new(move |u: C64| e(u) * inner(u)),
        None => Arc::new(inner),
    });
    let mut acc = C64::new(0.0, 0.0);
    for p in &p1 {
        match integrate_piece(&outer, p, opts) {
            Ok(v) => acc += v,
            Err(e) => {
                if let Some(inner_err) = failure.read().unwrap().clone() {
                    return Err(inner_err);
                }
                return Err(e);
            }
        }
    }
    if let Some(e) = failure.read().unwrap().clone() {
        return Err(e);
    }
    Ok(acc)
}

/// Iterated double integral continued in the endpoint exponents: the inner
/// variable runs over the segment `a2 -> b2` (pure power product) and each
/// outer segment piece is continued at its endpoints.
pub fn double_integral_continued(
    f1: &BranchedIntegrand,
    c1: &ContourSpec,
    f2: &BranchedIntegrand,
    (a2, b2): (C64, C64),
    coupling: Coupling,
    opts: &QuadOptions,
) -> Result<C64> {
    let p1 = c1.pieces();
    let inner_piece = Piece::Segment(a2, b2);
    if p1.iter().any(|p| pieces_intersect(p, &inner_piece)) {
        return Err(Error::Geometry("integration contours intersect".into()));
    }
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 1e-2, ..*opts };
    let f2 = f2.clone();
    let failure: Arc<RwLock<Option<Error>>> = Arc::new(RwLock::new(None));
    let fail = failure.clone();
    let inner = move |u1: C64| -> C64 {
        let mut g = f2.clone();
        g.push(Factor { point: u1, exponent: coupling.exponent, scale: coupling.scale });
        match integrate_segment_regularized(&g, a2, b2, &inner_opts) {
            Ok(v) => v,
            Err(e) => {
                *fail.write().unwrap() = Some(e);
                C64::new(f64::NAN, f64::NAN)
            }
        }
    };
    let mut outer = f1.clone();
    outer.extra = Some(match f1.extra.clone() {
        Some(e) => Arc::new(move |u: C64| e(u) * inner(u)),
        None => Arc::new(inner),
    });
    let mut acc = C64::new(0.0, 0.0);
    for p in &p1 {
        let r = match *p {
            Piece::Segment(a, b) => {
                let radius = dist_to_segment(a, a2, b2).min(dist_to_segment(b, a2, b2));
                integrate_segment_continued(&outer, a, b, radius, opts)
            }
            Piece::Ray { .. } => integrate_piece(&outer, p, opts),
        };
        match r {
            Ok(v) => acc += v,
            Err(e) => {
                if let Some(inner_err) = failure.read().unwrap().clone() {
                    return Err(inner_err);
                }
                return Err(e);
            }
        }
    }
    if let Some(e) = failure.read().unwrap().clone() {
        return Err(e);
    }
    Ok(acc)
}

fn pieces_intersect(a: &Piece, b: &Piece) -> bool {
    let seg = |p: &Piece| match *p {
        Piece::Segment(x, y) => (x, y),
        Piece::Ray { start, dir } => (start, start + dir * 1e12),
    };
    let (p1, p2) = seg(a);
    let (q1, q2) = seg(b);
    let cross = |o: C64, a: C64, b: C64| ((a - o).conj() * (b - o)).im;
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    // Shared points count as intersections only for non-endpoint contact.
    let on = |p: C64, a: C64, b: C64| dist_to_segment(p, a, b) < 1e-14 * (1.0 + p.norm());
    let touches = |p: C64| p != q1 && p != q2 && on(p, q1, q2);
    touches(p1) || touches(p2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn jacobi_rule_integrates_polynomials() {
        let r = gauss_jacobi(8, 0.3, -0.4);
        // int (1-x)^0.3 (1+x)^-0.4 dx over [-1,1] = 2^{0.9} B(1.3, 0.6)
        let s: f64 = r.weights.iter().sum();
        let exact = 2f64.powf(0.9) * gamma(1.3) * gamma(0.6) / gamma(1.9);
        assert!((s - exact).abs() < 1e-13 * exact);
        let legendre = gauss_jacobi(5, 0.0, 0.0);
        let m4: f64 = legendre.nodes.iter().zip(&legendre.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn beta_integrals() {
        let f = BranchedIntegrand::new(vec![]);
        let v = integrate_singular_segment(&f, 0.0, 1.0, -0.5, -0.5, &QuadOptions::default()).unwrap();
        assert!((v.re - PI).abs() < 1e-12);
        let v = integrate_singular_segment(&f, 0.0, 1.0, -0.3, 0.3, &QuadOptions::default()).unwrap();
        let exact = gamma(0.7) * gamma(1.3) / gamma(2.0);
        assert!((v.re - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn ray_integral() {
        // int_1^inf u^{-2} (u-1)^{-1/2} du = B(1/2, 3/2) = pi/2
        let f = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -2.0), Factor::forward(c(1.0), -0.5)]);
        let v = integrate_piece(&f, &Piece::Ray { start: c(1.0), dir: c(1.0) }, &QuadOptions::default()).unwrap();
        assert!((v.re - PI / 2.0).abs() < 1e-11, "{v}");
        let slow = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -0.9)]);
        assert!(integrate_piece(&slow, &Piece::Ray { start: c(1.0), dir: c(1.0) }, &QuadOptions::default()).is_err());
    }

    #[test]
    fn regularized_beta_continuation() {
        let f = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -1.3), Factor::backward(c(1.0), -0.3)]);
        let v = integrate_segment_regularized(&f, c(0.0), c(1.0), &QuadOptions::default()).unwrap();
        let exact = gamma(-0.3) * gamma(0.7) / gamma(0.4);
        assert!((v.re - exact).abs() < 1e-10 * exact.abs(), "{v} vs {exact}");
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn continued_agrees_with_regularized() {
        let f = BranchedIntegrand::new(vec![
            Factor::forward(c(0.0), -1.3),
            Factor::backward(c(1.0), -1.6),
            Factor::backward(c(2.5), 0.4),
        ]);
        let o = QuadOptions::default();
        let a = integrate_segment_regularized(&f, c(0.0), c(1.0), &o).unwrap();
        let b = integrate_segment_continued(&f, c(0.0), c(1.0), f64::INFINITY, &o).unwrap();
        assert!((a - b).norm() < 1e-9 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn continued_with_smooth_part() {
        let f = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -1.4), Factor::backward(c(1.0), 0.5)])
            .with_extra(Arc::new(|u: C64| u.exp()));
        let v = integrate_segment_continued(&f, c(0.0), c(1.0), f64::INFINITY, &QuadOptions::default()).unwrap();
        // B(-0.4, 1.5) * 1F1(-0.4; 1.1; 1)
        let (a, b) = (-0.4, 1.1);
        let mut term = 1.0;
        let mut m = 1.0;
        for k in 0..60 {
            term *= (a + k as f64) / ((b + k as f64) * (k as f64 + 1.0));
            m += term;
        }
        let exact = gamma(-0.4) * gamma(1.5) / gamma(1.1) * m;
        assert!((v.re - exact).abs() < 1e-9 * exact.abs(), "{v} vs {exact}");
    }

    #[test]
    fn continued_double_integral_factorizes() {
        let f1 = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -1.25), Factor::backward(c(1.0), -0.5)]);
        let f2 = BranchedIntegrand::new(vec![Factor::forward(c(2.0), -1.5), Factor::backward(c(3.0), 0.3)]);
        let o = QuadOptions::default();
        let none = Coupling { exponent: 0.0, scale: c(1.0) };
        let v = double_integral_continued(&f1, &ContourSpec::RealSegment(0.0, 1.0), &f2, (c(2.0), c(3.0)), none, &o)
            .unwrap();
        let want = integrate_segment_regularized(&f1, c(0.0), c(1.0), &o).unwrap()
            * integrate_segment_regularized(&f2, c(2.0), c(3.0), &o).unwrap();
        assert!((v - want).norm() < 1e-8 * want.norm(), "{v} vs {want}");
    }

    #[test]
    fn pochhammer_matches_prefactor() {
        let f = BranchedIntegrand::new(vec![
            Factor::forward(c(0.0), -0.4),
            Factor::backward(c(1.0), 0.25),
            Factor::backward(c(2.0), 0.7),
        ]);
        let o = QuadOptions::default();
        let seg = integrate_segment_c(&f, c(0.0), c(1.0), &o).unwrap();
        let poch = pochhammer_integral(&f, 0.0, 1.0, &o).unwrap();
        let want = pochhammer_factor(-0.4, 0.25) * seg;
        assert!((poch - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn polyline_degenerate_and_homotopy() {
        let z = C64::new(0.5, 0.7);
        let pts = [
            OrderedPoint::real(0.0, -0.6),
            OrderedPoint::real(1.0, -0.6),
            OrderedPoint::real(2.0, -0.6),
            OrderedPoint::at(z, 0.4, f64::INFINITY),
            OrderedPoint::at(z.conj(), 0.4, f64::INFINITY),
        ];
        let o = QuadOptions::default();
        let mut vals = Vec::new();
        for cx in [1.2, 1.5, 1.85] {
            let f = BranchedIntegrand::new(ordered_factors(&pts, cx));
            let path = ContourSpec::ComplexPolyline { zbar: z.conj(), crossing: cx, z };
            vals.push(integrate_complex_polyline(&f, &path, &o).unwrap());
        }
        for v in &vals[1..] {
            assert!((v - vals[0]).norm() < 1e-9 * vals[0].norm());
        }
        // The conjugation symmetry of the path makes the result imaginary.
        assert!(vals[0].re.abs() < 1e-9 * vals[0].norm());
        let f = BranchedIntegrand::new(vec![]);
        let path = ContourSpec::ComplexPolyline { zbar: c(0.5), crossing: 0.5, z: c(0.5) };
        assert_eq!(integrate_complex_polyline(&f, &path, &o).unwrap(), c(0.0));
    }

    #[test]
    fn separable_double_integral() {
        let f1 = BranchedIntegrand::new(vec![Factor::forward(c(0.0), -0.5)]);
        let f2 = BranchedIntegrand::new(vec![Factor::backward(c(3.0), -0.25)]);
        let c1 = ContourSpec::RealSegment(0.0, 1.0);
        let c2 = ContourSpec::RealSegment(2.0, 3.0);
        let o = QuadOptions::default();
        let v = double_integral(&f1, &c1, &f2, &c2, Coupling { exponent: 0.0, scale: c(1.0) }, &o).unwrap();
        let want = integrate_contour(&f1, &c1, &o).unwrap() * integrate_contour(&f2, &c2, &o).unwrap();
        assert!((v - want).norm() < 1e-10 * want.norm());
        let crossing = ContourSpec::RealSegment(0.5, 2.5);
        assert!(matches!(
            double_integral(&f1, &c1, &f2, &crossing, Coupling { exponent: 0.0, scale: c(1.0) }, &o),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn clearance_violation_is_reported() {
        let f = BranchedIntegrand::new(vec![Factor::forward(c(0.5), -0.5)]);
        let path = ContourSpec::ComplexPolyline { zbar: C64::new(0.5, -1.0), crossing: 0.5, z: C64::new(0.5, 1.0) };
        assert!(matches!(integrate_contour(&f, &path, &QuadOptions::default()), Err(Error::Geometry(_))));
    }

    #[test]
    fn depth_cap_flags_unevaluable() {
        // A branch point 1e-14 above the segment cannot be resolved within the cap.
        let f = BranchedIntegrand::new(vec![Factor::forward(C64::new(0.3, 1e-14), -0.999)]);
        let o = QuadOptions { max_depth: 12, ..Default::default() };
        let r = integrate_segment_c(&f, c(0.0), c(1.0), &o);
        assert!(matches!(r, Err(Error::Unevaluable(_))), "{r:?}");
    }
}
