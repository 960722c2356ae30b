//! Schwarz-Christoffel maps from the upper half-plane to the rectangle and
//! the equiangular hexagon.
//!
//! Rectangle: vertices `0, R, R + i, i` are the images of `0, m, 1, inf`,
//! with `R = K(m) / K(1 - m)`. The inverse is `m sn(w K' | m)^2`.
//!
//! Hexagon: the prevertices `0 < m1 < m2 < m3 < 1` and infinity map to
//! six vertices traversed counterclockwise, with `w1 = 0`, `w2 > 0` and the
//! first side of unit length.

use crate::quad::{self, BranchedIntegrand, Factor, OrderedPoint, Piece, QuadOptions};
use crate::specfun::{ellip_k, jacobi_elliptic};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

fn cx(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn map_options() -> QuadOptions {
    QuadOptions::default().with_rel_tol(1e-13)
}

/// Product `prod (p_k - zeta)^e` on the principal branch, with the factor at
/// zero written as `zeta^e`. Real and positive on `(0, p_1)`.
fn sc_factors(prevertices: &[f64], exponent: f64) -> Vec<Factor> {
    let mut f = vec![Factor::forward(cx(0.0), exponent)];
    for &p in prevertices {
        f.push(Factor::backward(cx(p), exponent));
    }
    f
}

/// Integral of the SC integrand from `a` to `b` inside the closed upper
/// half-plane, routed through an apex when the straight segment would pass
/// too close to a prevertex.
fn sc_integral(prevertices: &[f64], exponent: f64, a: C64, b: C64) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let integrand = BranchedIntegrand::new(sc_factors(prevertices, exponent));
    let opts = map_options();
    let len = (b - a).norm();
    let mut close = false;
    for &p in std::iter::once(&0.0).chain(prevertices) {
        let pp = cx(p);
        if (pp - a).norm() < 1e-14 || (pp - b).norm() < 1e-14 {
            continue;
        }
        if seg_dist(pp, a, b) < 0.05 * len.min(1.0) {
            close = true;
        }
    }
    if !close {
        return quad::integrate_segment_c(&integrand, a, b, &opts);
    }
    let mid = 0.5 * (a + b);
    let apex = C64::new(mid.re, mid.im.max(0.0) + 0.5 * len.max(0.1));
    Ok(quad::integrate_segment_c(&integrand, a, apex, &opts)? + quad::integrate_segment_c(&integrand, apex, b, &opts)?)
}

fn seg_dist(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Value of the SC integrand at `z`.
fn sc_integrand(prevertices: &[f64], exponent: f64, z: C64) -> C64 {
    let mut lg = z.ln() * exponent;
    for &p in prevertices {
        lg += (cx(p) - z).ln() * exponent;
    }
    lg.exp()
}

/// Length of the real interval `(a, b)` image, `b` possibly infinite, and
/// `a` possibly minus infinity.
fn side_integral(prevertices: &[f64], exponent: f64, a: f64, b: f64) -> Result<f64> {
    let mut pts = vec![OrderedPoint::real(0.0, exponent)];
    for &p in prevertices {
        pts.push(OrderedPoint::real(p, exponent));
    }
    let opts = map_options();
    let v = if a.is_finite() && b.is_finite() {
        let f = BranchedIntegrand::new(quad::ordered_factors(&pts, 0.5 * (a + b)));
        quad::integrate_segment_c(&f, cx(a), cx(b), &opts)?
    } else if a.is_finite() {
        let f = BranchedIntegrand::new(quad::ordered_factors(&pts, f64::INFINITY));
        quad::integrate_piece(&f, &Piece::Ray { start: cx(a), dir: cx(1.0) }, &opts)?
    } else {
        let f = BranchedIntegrand::new(quad::ordered_factors(&pts, f64::NEG_INFINITY));
        -quad::integrate_piece(&f, &Piece::Ray { start: cx(b), dir: cx(-1.0) }, &opts)?
    };
    Ok(v.re)
}

// ---------------------------------------------------------------------------
// Rectangle
// ---------------------------------------------------------------------------

/// Rectangle `[0, R] x [0, 1]` and its elliptic parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectGeometry {
    pub aspect: f64,
    pub m: f64,
    pub k: f64,
    pub kprime: f64,
}

/// Solve `K(m) / K(1 - m) = R` by bisection.
pub fn rect_from_aspect(aspect: f64) -> Result<RectGeometry> {
    if !(aspect > 0.0 && aspect.is_finite()) {
        return Err(Error::Domain(format!("aspect ratio {aspect} must be positive")));
    }
    let ratio = |m: f64| ellip_k(m).unwrap() / ellip_k(1.0 - m).unwrap();
    let (mut lo, mut hi) = (f64::EPSILON, 1.0 - f64::EPSILON);
    if ratio(lo) > aspect || ratio(hi) < aspect {
        return Err(Error::Domain(format!("aspect ratio {aspect} is too extreme")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < aspect {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    Ok(RectGeometry::from_parameter(m))
}

impl RectGeometry {
    pub fn from_parameter(m: f64) -> RectGeometry {
        let k = ellip_k(m).expect("parameter in (0, 1)");
        let kprime = ellip_k(1.0 - m).expect("parameter in (0, 1)");
        RectGeometry { aspect: k / kprime, m, k, kprime }
    }

    pub fn vertices(&self) -> [C64; 4] {
        [cx(0.0), cx(self.aspect), C64::new(self.aspect, 1.0), C64::new(0.0, 1.0)]
    }

    pub fn prevertices(&self) -> [f64; 3] {
        [0.0, self.m, 1.0]
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * self.aspect, 0.5)
    }

    /// `(sn, cn, dn)(w K' | m)`.
    pub fn elliptic(&self, w: C64) -> Result<(C64, C64, C64)> {
        jacobi_elliptic(w * self.kprime, self.m)
    }

    /// `dz/dw = 2 m K' sn cn dn`.
    pub fn inverse_derivative(&self, w: C64) -> Result<C64> {
        let (sn, cn, dn) = self.elliptic(w)?;
        Ok(sn * cn * dn * (2.0 * self.m * self.kprime))
    }

    fn contains(&self, w: C64, tol: f64) -> bool {
        w.re >= -tol && w.re <= self.aspect + tol && w.im >= -tol && w.im <= 1.0 + tol
    }
}

/// `z = m sn(w K' | m)^2`.
pub fn rect_inverse(w: C64, geo: &RectGeometry) -> Result<C64> {
    if !geo.contains(w, 1e-12) {
        return Err(Error::Domain(format!("{w} lies outside the rectangle")));
    }
    let (sn, _, _) = geo.elliptic(w)?;
    let mut z = sn * sn * geo.m;
    if z.im < 0.0 && z.im > -1e-14 * z.norm().max(1.0) {
        z.im = 0.0;
    }
    Ok(z)
}

/// `w = f(z)` by quadrature of the SC integrand.
pub fn rect_forward(z: C64, geo: &RectGeometry) -> Result<C64> {
    if z.im < 0.0 {
        return Err(Error::Domain(format!("{z} lies below the real axis")));
    }
    let v = sc_integral(&[geo.m, 1.0], -0.5, cx(0.0), z)?;
    Ok(v / (2.0 * geo.kprime))
}

// ---------------------------------------------------------------------------
// Hexagon
// ---------------------------------------------------------------------------

const HEX_EXP: f64 = -1.0 / 3.0;

/// Equiangular hexagon with its prevertices, scale, vertices and a cache of
/// `(w, z)` pairs used to seed inversion.
#[derive(Debug, Clone)]
pub struct HexGeometry {
    pub prevertices: [f64; 3],
    /// Multiplier of the SC integral; makes the first side unit length.
    pub scale: f64,
    pub vertices: [C64; 6],
    pub side_lengths: [f64; 6],
    /// Preimage of the vertex centroid.
    pub center_preimage: C64,
    cache: Vec<(C64, C64)>,
}

/// Prevertices of the regular hexagon. The Mobius map `z -> -m1 / (z - 1)`
/// cycles `0, m1, m2, m3, 1, inf`; requiring it to do so forces this triple.
pub fn hex_prevertices_regular() -> [f64; 3] {
    [1.0 / 3.0, 0.5, 2.0 / 3.0]
}

/// Side lengths (unscaled) for a prevertex triple.
pub fn hex_raw_sides(pv: [f64; 3]) -> Result<[f64; 6]> {
    let [m1, m2, m3] = pv;
    if !(0.0 < m1 && m1 < m2 && m2 < m3 && m3 < 1.0) {
        return Err(Error::Domain(format!("prevertices {pv:?} not strictly ordered in (0, 1)")));
    }
    let pts = [m1, m2, m3, 1.0];
    let bounds = [(0.0, m1), (m1, m2), (m2, m3), (m3, 1.0), (1.0, f64::INFINITY), (f64::NEG_INFINITY, 0.0)];
    let mut out = [0.0; 6];
    for (k, (a, b)) in bounds.into_iter().enumerate() {
        out[k] = side_integral(&pts, HEX_EXP, a, b)?;
    }
    Ok(out)
}

impl HexGeometry {
    pub fn regular() -> Result<HexGeometry> {
        HexGeometry::new(hex_prevertices_regular())
    }

    pub fn new(pv: [f64; 3]) -> Result<HexGeometry> {
        let raw = hex_raw_sides(pv)?;
        let scale = 1.0 / raw[0];
        let side_lengths = raw.map(|l| l * scale);
        let mut vertices = [cx(0.0); 6];
        for k in 1..6 {
            vertices[k] = vertices[k - 1] + C64::from_polar(side_lengths[k - 1], PI * (k - 1) as f64 / 3.0);
        }
        let mut geo = HexGeometry {
            prevertices: pv,
            scale,
            vertices,
            side_lengths,
            center_preimage: C64::new(0.5, 0.5 / 3f64.sqrt()),
            cache: Vec::new(),
        };
        let centroid = geo.centroid();
        let seed = geo.center_preimage;
        let wseed = geo.forward(seed)?;
        geo.center_preimage = geo.newton(centroid, seed, wseed)?;
        geo.build_cache()?;
        Ok(geo)
    }

    pub fn centroid(&self) -> C64 {
        self.vertices.iter().sum::<C64>() / 6.0
    }

    fn points(&self) -> [f64; 4] {
        [self.prevertices[0], self.prevertices[1], self.prevertices[2], 1.0]
    }

    /// `dw/dz` at `z`.
    pub fn derivative(&self, z: C64) -> C64 {
        sc_integrand(&self.points(), HEX_EXP, z) * self.scale
    }

    /// `w = f(z)`.
    pub fn forward(&self, z: C64) -> Result<C64> {
        self.forward_between(cx(0.0), z)
    }

    /// `f(b) - f(a)`.
    pub fn forward_between(&self, a: C64, b: C64) -> Result<C64> {
        if a.im < 0.0 || b.im < 0.0 {
            return Err(Error::Domain("hexagon map needs points in the closed upper half-plane".into()));
        }
        Ok(sc_integral(&self.points(), HEX_EXP, a, b)? * self.scale)
    }

    /// Inside test with tolerance: the hexagon is the intersection of six
    /// half-planes to the left of each directed side.
    pub fn contains(&self, w: C64, tol: f64) -> bool {
        (0..6).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % 6];
            let d = b - a;
            ((w - a) * d.conj()).im >= -tol * d.norm()
        })
    }

    fn newton(&self, target: C64, seed: C64, wseed: C64) -> Result<C64> {
        self.newton_depth(target, seed, wseed, 0)
    }

    fn newton_depth(&self, target: C64, seed: C64, wseed: C64, depth: u32) -> Result<C64> {
        let mut z = seed + (target - wseed) / self.derivative(seed);
        if z.im <= 0.0 {
            z = C64::new(z.re, 0.5 * seed.im.max(1e-300));
        }
        let mut resid = f64::INFINITY;
        for _ in 0..40 {
            let w = wseed + self.forward_between(seed, z)?;
            let r = w - target;
            let rn = r.norm();
            if rn < 1e-13 * (1.0 + target.norm()) {
                return Ok(z);
            }
            if rn > resid && depth < 8 {
                break;
            }
            resid = rn;
            let mut step = r / self.derivative(z);
            while (z - step).im <= 0.0 {
                step *= 0.5;
            }
            z -= step;
        }
        if depth >= 8 {
            return Err(Error::Numeric(format!("hexagon inversion did not converge at {target}")));
        }
        // Continuation through the midpoint.
        let mid = 0.5 * (target + wseed);
        let zm = self.newton_depth(mid, seed, wseed, depth + 1)?;
        self.newton_depth(target, zm, mid, depth + 1)
    }

    fn build_cache(&mut self) -> Result<()> {
        let c = self.centroid();
        let mut cache = vec![(c, self.center_preimage)];
        const RINGS: usize = 8;
        // Points on concentric scaled copies of the boundary, each solved from
        // the nearest cached point of the previous ring.
        for ring in 1..=RINGS {
            let t = 0.97 * ring as f64 / RINGS as f64;
            let per_side = ring;
            for k in 0..6 {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % 6];
                for j in 0..per_side {
                    let p = a + (b - a) * (j as f64 / per_side as f64);
                    let w = c + (p - c) * t;
                    let (ws, zs) = nearest(&cache, w);
                    let z = self.newton(w, zs, ws)?;
                    cache.push((w, z));
                }
            }
        }
        self.cache = cache;
        Ok(())
    }

    /// `z = f^{-1}(w)` for `w` inside the hexagon.
    pub fn inverse(&self, w: C64) -> Result<C64> {
        if !self.contains(w, 1e-12) {
            return Err(Error::Domain(format!("{w} lies outside the hexagon")));
        }
        let (ws, zs) = nearest(&self.cache, w);
        self.newton(w, zs, ws)
    }
}

fn nearest(cache: &[(C64, C64)], w: C64) -> (C64, C64) {
    *cache.iter().min_by(|a, b| (a.0 - w).norm().partial_cmp(&(b.0 - w).norm()).unwrap()).expect("cache is never empty")
}

pub fn hex_forward(z: C64, geo: &HexGeometry) -> Result<C64> {
    geo.forward(z)
}

pub fn hex_inverse(w: C64, geo: &HexGeometry) -> Result<C64> {
    geo.inverse(w)
}

/// Solve for prevertices giving side ratios `L_{k+1} / L_1`, `k = 1..5`.
/// Three ratios determine the hexagon; the other two must agree.
pub fn hex_prevertices_solve(ratios: [f64; 5]) -> Result<[f64; 3]> {
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("side ratios {ratios:?} must be positive")));
    }
    // Closure of an equiangular hexagon: L1 + L2 = L4 + L5 and L2 + L3 = L5 + L6.
    let l = [1.0, ratios[0], ratios[1], ratios[2], ratios[3], ratios[4]];
    let close1 = l[0] + l[1] - l[3] - l[4];
    let close2 = l[1] + l[2] - l[4] - l[5];
    if close1.abs() > 1e-8 || close2.abs() > 1e-8 {
        return Err(Error::Domain(format!("side ratios {ratios:?} do not close an equiangular hexagon")));
    }
    let target = [ratios[0], ratios[1], ratios[2]];
    let resid = |pv: [f64; 3]| -> Result<[f64; 3]> {
        let s = hex_raw_sides(pv)?;
        Ok([s[1] / s[0] - target[0], s[2] / s[0] - target[1], s[3] / s[0] - target[2]])
    };
    let norm = |r: &[f64; 3]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Unconstrained coordinates: log-gaps between consecutive points.
    let to_pv = |y: [f64; 3]| -> [f64; 3] {
        let e = [1.0, y[0].exp(), y[1].exp(), y[2].exp()];
        let tot: f64 = e.iter().sum();
        [e[0] / tot, (e[0] + e[1]) / tot, (e[0] + e[1] + e[2]) / tot]
    };
    let mut y = [0.0f64; 3];
    let mut r = resid(to_pv(y))?;
    for _ in 0..100 {
        let rn = norm(&r);
        if rn < 1e-12 {
            return Ok(to_pv(y));
        }
        let h = 1e-6;
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut yp = y;
            yp[j] += h;
            let mut ym = y;
            ym[j] -= h;
            let rp = resid(to_pv(yp))?;
            let rm = resid(to_pv(ym))?;
            for i in 0..3 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = solve3(jac, r).ok_or_else(|| Error::Numeric("singular Jacobian in prevertex solve".into()))?;
        let mut lam = 1.0;
        loop {
            let yn = [y[0] - lam * step[0], y[1] - lam * step[1], y[2] - lam * step[2]];
            if let Ok(rn_new) = resid(to_pv(yn)) {
                if norm(&rn_new) < rn {
                    y = yn;
                    r = rn_new;
                    break;
                }
            }
            lam *= 0.5;
            if lam < 1e-6 {
                return Err(Error::Numeric(format!("prevertex solve stalled with residual {rn:.3e}")));
            }
        }
    }
    Err(Error::Numeric(format!("prevertex solve did not converge; residual {:.3e}", norm(&r))))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for (j, xj) in x.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][j] = b[i];
        }
        *xj = det(m) / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_half_parameter() {
        let g = rect_from_aspect(1.0).unwrap();
        assert!((g.m - 0.5).abs() < 1e-12);
        let g2 = rect_from_aspect(2.0).unwrap();
        let gh = rect_from_aspect(0.5).unwrap();
        assert!((g2.m + gh.m - 1.0).abs() < 1e-10);
        assert!((g2.k / g2.kprime - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rectangle_vertices() {
        let g = rect_from_aspect(2.0).unwrap();
        let w = rect_forward(cx(g.m), &g).unwrap();
        assert!((w - cx(2.0)).norm() < 1e-9, "{w}");
        let w = rect_forward(cx(1.0), &g).unwrap();
        assert!((w - C64::new(2.0, 1.0)).norm() < 1e-9, "{w}");
        let z = rect_inverse(C64::new(2.0, 0.0), &g).unwrap();
        assert!((z - g.m).norm() < 1e-10);
    }

    #[test]
    fn rectangle_round_trip() {
        let g = rect_from_aspect(2.0).unwrap();
        for &(x, y) in &[(0.3, 0.2), (1.0, 0.5), (1.9, 0.9), (0.05, 0.95)] {
            let w = C64::new(x, y);
            let z = rect_inverse(w, &g).unwrap();
            assert!(z.im > 0.0);
            let back = rect_forward(z, &g).unwrap();
            assert!((back - w).norm() < 1e-9, "{w} -> {z} -> {back}");
        }
        assert!(rect_inverse(C64::new(2.5, 0.5), &g).is_err());
    }

    #[test]
    fn regular_hexagon_sides_are_equal() {
        let s = hex_raw_sides(hex_prevertices_regular()).unwrap();
        for l in &s[1..] {
            assert!((l / s[0] - 1.0).abs() < 1e-8, "{s:?}");
        }
        let p = hex_raw_sides([1.0 / 3.0 + 1e-3, 0.5, 2.0 / 3.0]).unwrap();
        let (lo, hi) = p.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!((hi - lo) / p[0] > 1e-4);
    }

    #[test]
    fn hexagon_round_trip_and_vertices() {
        let g = HexGeometry::regular().unwrap();
        assert!((g.vertices[2] - C64::new(1.5, 3f64.sqrt() / 2.0)).norm() < 1e-9);
        let w3 = g.forward(cx(0.5)).unwrap();
        assert!((w3 - g.vertices[2]).norm() < 1e-9, "{w3}");
        let c = g.inverse(g.centroid()).unwrap();
        assert!((c - C64::new(0.5, 0.5 / 3f64.sqrt())).norm() < 1e-9, "{c}");
        for w in [C64::new(0.5, 0.1), C64::new(1.0, 1.5), C64::new(-0.3, 0.9), C64::new(0.98, 0.02), C64::new(0.5, 1.7)]
        {
            let z = g.inverse(w).unwrap();
            assert!((g.forward(z).unwrap() - w).norm() < 1e-9);
        }
    }
}
