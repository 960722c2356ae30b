//! Special functions.
//!
//! Elliptic functions use the parameter `m` (modulus squared) throughout:
//! `K(m)`, `K'(m) = K(1 - m)`, `sn(u | m)`.

use crate::quad::{self, BranchedIntegrand, Factor, QuadOptions};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    s
}

/// `Gamma(x)` for real `x`; infinite at non-positive integers.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        if x == x.floor() {
            return f64::INFINITY;
        }
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
}

/// `ln |Gamma(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

/// `1 / Gamma(x)`, exactly zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Euler beta function `Gamma(a) Gamma(b) / Gamma(a + b)`.
pub fn beta(a: f64, b: f64) -> f64 {
    gamma(a) * gamma(b) * rgamma(a + b)
}

fn is_nonpositive_integer(c: f64) -> bool {
    c <= 0.0 && c == c.floor()
}

fn hyp2f1_series(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    const MAX_TERMS: usize = 2_000_000;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut abs_sum = 1.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * x;
        sum += term;
        abs_sum += term.abs();
        if term == 0.0 {
            return Ok(sum);
        }
        let ratio = ((a + kf + 1.0) * (b + kf + 1.0) / ((c + kf + 1.0) * (kf + 2.0)) * x).abs();
        if ratio < 1.0 && term.abs() / (1.0 - ratio) <= 1e-17 * sum.abs().max(1e-300) {
            if abs_sum > 1e6 * sum.abs() {
                return Err(Error::Numeric(format!(
                    "2F1({a}, {b}; {c}; {x}): series lost {:.0} digits to cancellation",
                    (abs_sum / sum.abs()).log10()
                )));
            }
            return Ok(sum);
        }
    }
    Err(Error::Numeric(format!("2F1({a}, {b}; {c}; {x}): series did not converge in {MAX_TERMS} terms")))
}

/// Gauss hypergeometric function for real `x` in `(-1, 1)`.
pub fn gauss_2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::Domain(format!("2F1 argument {x} outside (-1, 1)")));
    }
    if is_nonpositive_integer(c) {
        return Err(Error::Domain(format!("2F1 lower parameter {c} is a non-positive integer")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < 0.0 {
        let y = x / (x - 1.0);
        return Ok((1.0 - x).powf(-a) * hyp2f1_series(a, c - b, c, y)?);
    }
    let d = c - a - b;
    if x > 0.75 && (d - d.round()).abs() > 1e-3 {
        let y = 1.0 - x;
        let first = if is_nonpositive_integer(c - a) || is_nonpositive_integer(c - b) {
            0.0
        } else {
            gamma(c) * gamma(d) * rgamma(c - a) * rgamma(c - b) * hyp2f1_series(a, b, 1.0 - d, y)?
        };
        let second = if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
            0.0
        } else {
            gamma(c) * gamma(-d) * rgamma(a) * rgamma(b) * y.powf(d) * hyp2f1_series(c - a, c - b, 1.0 + d, y)?
        };
        return Ok(first + second);
    }
    hyp2f1_series(a, b, c, x)
}

/// `int_0^x t^{a-1} (1-t)^{b-1} dt` for `x` in `[0, 1)`, any real `b`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::Precondition(format!("incomplete beta needs a > 0, got {a}")));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta argument {x} outside [0, 1)")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    match gauss_2f1(a, 1.0 - b, a + 1.0, x) {
        Ok(f) => Ok(x.powf(a) / a * f),
        Err(_) => {
            let f = BranchedIntegrand::new(vec![Factor::backward(C64::new(1.0, 0.0), b - 1.0)]);
            let opts = QuadOptions::default().with_rel_tol(1e-12);
            Ok(quad::integrate_singular_segment(&f, 0.0, x, a - 1.0, 0.0, &opts)?.re)
        }
    }
}

/// Complete elliptic integral of the first kind, parameter `m` in `(0, 1)`.
pub fn ellip_k(m: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Domain(format!("elliptic parameter {m} outside (0, 1)")));
    }
    Ok(ellip_k_unchecked(m))
}

pub(crate) fn ellip_k_unchecked(m: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, (1.0 - m).sqrt());
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (a + b)
}

/// Real-argument `(sn, cn, dn)` by the descending AGM recursion.
pub fn jacobi_real(u: f64, m: f64) -> (f64, f64, f64) {
    if m <= 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    if m >= 1.0 {
        let s = 1.0 / u.cosh();
        return (u.tanh(), s, s);
    }
    let mut a = [0.0f64; 32];
    let mut c = [0.0f64; 32];
    a[0] = 1.0;
    let mut b = (1.0 - m).sqrt();
    c[0] = m.sqrt();
    let mut n = 0;
    while c[n].abs() > 1e-16 && n < 30 {
        let an = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        a[n + 1] = an;
        n += 1;
    }
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    let mut prev = phi;
    for k in (1..=n).rev() {
        prev = phi;
        phi = 0.5 * (phi + (c[k] / a[k] * phi.sin()).asin());
    }
    let (s, co) = phi.sin_cos();
    let dn = if n == 0 {
        1.0
    } else if co.abs() > 1e-3 {
        co / (prev - phi).cos()
    } else {
        (1.0 - m * s * s).sqrt()
    };
    (s, co, dn)
}

/// `(sn, cn, dn)(u | m)` for complex `u` via the imaginary-argument
/// addition formulas. Arguments near a pole give an `Unevaluable` error.
pub fn jacobi_elliptic(u: C64, m: f64) -> Result<(C64, C64, C64)> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("elliptic parameter {m} outside [0, 1)")));
    }
    let (s, c, d) = jacobi_real(u.re, m);
    let (s1, c1, d1) = jacobi_real(u.im, 1.0 - m);
    let den = c1 * c1 + m * s * s * s1 * s1;
    if den.abs() < 1e-14 {
        return Err(Error::Unevaluable(format!("sn({u} | {m}) is at a pole")));
    }
    let sn = C64::new(s * d1, c * d * s1 * c1) / den;
    let cn = C64::new(c * c1, -s * d * s1 * d1) / den;
    let dn = C64::new(d * c1 * d1, -m * s * c * s1) / den;
    Ok((sn, cn, dn))
}

/// Arguments of `F_D(a; b_1..b_k; c; x_1..x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdArgs {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: f64,
    pub x: Vec<C64>,
}

impl FdArgs {
    fn integrand(&self) -> Result<BranchedIntegrand> {
        if self.b.len() != self.x.len() {
            return Err(Error::Precondition("F_D: b and x lengths differ".into()));
        }
        let one = C64::new(1.0, 0.0);
        let mut f =
            vec![Factor::forward(C64::new(0.0, 0.0), self.a - 1.0), Factor::backward(one, self.c - self.a - 1.0)];
        for (&b, &x) in self.b.iter().zip(&self.x) {
            if x.norm() == 0.0 || b == 0.0 {
                continue;
            }
            if x.im == 0.0 && x.re > 1.0 {
                return Err(Error::Domain(format!("F_D argument {x} puts a branch point inside (0, 1)")));
            }
            // (1 - x t)^{-b} = (-x (t - 1/x))^{-b}
            f.push(Factor { point: one / x, exponent: -b, scale: -x });
        }
        Ok(BranchedIntegrand::new(f))
    }
}

/// Default quadrature tolerance for `F_D`.
pub fn fd_options() -> QuadOptions {
    QuadOptions::default().with_rel_tol(1e-12)
}

/// Lauricella `F_D` by its Euler integral, normalized to 1 at `x = 0`.
/// Requires `a > 0` and `c - a > 0`.
pub fn lauricella_fd(args: &FdArgs) -> Result<C64> {
    lauricella_fd_with(args, &fd_options())
}

pub fn lauricella_fd_with(args: &FdArgs, opts: &QuadOptions) -> Result<C64> {
    if !(args.a > 0.0 && args.c - args.a > 0.0) {
        return Err(Error::Precondition(format!(
            "F_D Euler integral needs a > 0 and c - a > 0 (a = {}, c = {})",
            args.a, args.c
        )));
    }
    let f = args.integrand()?;
    let norm = gamma(args.c) * rgamma(args.a) * rgamma(args.c - args.a);
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    Ok(quad::integrate_segment_c(&f, zero, one, opts)? * norm)
}

/// `F_D` outside the Euler regime, by analytic continuation of the Euler
/// integral in its endpoint exponents (the Pochhammer-contour value divided
/// by its double-loop factor). Agrees with [`lauricella_fd`] where both apply.
pub fn lauricella_fd_regularized(args: &FdArgs) -> Result<C64> {
    if args.a > 0.0 && args.c - args.a > 0.0 {
        return lauricella_fd(args);
    }
    for e in [args.a, args.c - args.a] {
        if is_nonpositive_integer(e) {
            return Err(Error::Numeric(format!(
                "F_D endpoint exponent {} is a negative integer; only a limit is defined",
                e - 1.0
            )));
        }
    }
    let f = args.integrand()?;
    let norm = gamma(args.c) * rgamma(args.a) * rgamma(args.c - args.a);
    let v = quad::integrate_segment_regularized(&f, C64::new(0.0, 0.0), C64::new(1.0, 0.0), &fd_options())?;
    Ok(v * norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_values() {
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(5.0), 24.0) < 1e-14);
        assert!(rel(gamma(-0.5), -2.0 * PI.sqrt()) < 1e-14);
        assert_eq!(rgamma(-2.0), 0.0);
        assert!(rel(ln_gamma(10.0), 362880f64.ln()) < 1e-14);
        assert!(rel(beta(0.5, 0.5), PI) < 1e-14);
    }

    #[test]
    fn hypergeometric_examples() {
        assert_eq!(gauss_2f1(0.3, 0.4, 0.5, 0.0).unwrap(), 1.0);
        assert!(rel(gauss_2f1(1.0, 1.0, 2.0, 0.5).unwrap(), 2.0 * 2f64.ln()) < 1e-14);
        // -ln(1-x)/x on both sides of the transformation threshold
        for x in [-0.9, -0.3, 0.7, 0.8, 0.95, 0.999] {
            let want = -(1.0f64 - x).ln() / x;
            assert!(rel(gauss_2f1(1.0, 1.0, 2.0, x).unwrap(), want) < 1e-12, "x = {x}");
        }
        // arcsin identity with non-integer c - a - b
        for x in [0.2f64, 0.8, 0.97] {
            let want = x.sqrt().asin() / (x * (1.0 - x)).sqrt();
            assert!(rel(gauss_2f1(1.0, 1.0, 1.5, x).unwrap(), want) < 1e-11, "x = {x}");
        }
        assert!(gauss_2f1(1.0, 1.0, -2.0, 0.3).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn percolation_block_matches_series_oracle() {
        // direct summation with compensated accumulation
        let (a, b, c, x) = (4.0 / 6.0, 1.0 - 4.0 / 6.0, 8.0 / 6.0, 0.5f64);
        let mut t = 1.0f64;
        let mut s = 1.0f64;
        for k in 0..200 {
            let k = k as f64;
            t *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x;
            s += t;
        }
        assert!(rel(gauss_2f1(a, b, c, x).unwrap(), s) < 1e-13);
    }

    #[test]
    fn incomplete_beta_cases() {
        assert_eq!(incomplete_beta(0.7, 1.3, 0.0).unwrap(), 0.0);
        for x in [0.1, 0.5, 0.9] {
            assert!(rel(incomplete_beta(1.0, 1.0, x).unwrap(), x) < 1e-13);
        }
        assert!(incomplete_beta(0.0, 1.0, 0.5).is_err());
        let (a, b) = (0.5, -0.3);
        let eps: f64 = 1e-6;
        let v = incomplete_beta(a, b, 1.0 - eps).unwrap();
        let lead = -eps.powf(b) / b;
        assert!(rel(v, lead) < 0.01);
        // next order: the complete beta constant
        assert!(rel(v - beta(a, b), lead) < 1e-5);
        // integer b falls back to quadrature
        let v = incomplete_beta(0.5, -1.0, 0.9).unwrap();
        let exact = {
            // int t^{-1/2} (1-t)^{-2} dt = sqrt(t)/(1-t) + atanh(sqrt(t))
            let s = 0.9f64.sqrt();
            s / 0.1 + s.atanh()
        };
        assert!(rel(v, exact) < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn elliptic_k() {
        assert!(rel(ellip_k(1e-15).unwrap(), PI / 2.0) < 1e-14);
        assert!(rel(ellip_k(0.5).unwrap(), 1.854_074_677_301_372) < 1e-14);
        assert!(ellip_k(0.0).is_err() && ellip_k(1.0).is_err());
    }

    #[test]
    fn jacobi_examples() {
        let u = C64::new(0.3, 0.2);
        let (sn, _, _) = jacobi_elliptic(u, 0.0).unwrap();
        assert!((sn - u.sin()).norm() < 1e-14);
        let k = ellip_k(0.5).unwrap();
        let (sn, cn, dn) = jacobi_elliptic(C64::new(k, 0.0), 0.5).unwrap();
        assert!((sn - 1.0).norm() < 1e-13 && cn.norm() < 1e-13 && (dn - 0.5f64.sqrt()).norm() < 1e-13);
        // pole at i K'
        let kp = ellip_k(0.5).unwrap();
        assert!(jacobi_elliptic(C64::new(0.0, kp), 0.5).is_err());
    }

    #[test]
    fn fd_reduces_to_gauss() {
        let args = FdArgs { a: 0.6, b: vec![0.7], c: 1.9, x: vec![C64::new(0.4, 0.0)] };
        let v = lauricella_fd(&args).unwrap();
        assert!(rel(v.re, gauss_2f1(0.6, 0.7, 1.9, 0.4).unwrap()) < 1e-11);
        let zero = FdArgs { a: 0.6, b: vec![0.7, 0.2], c: 1.9, x: vec![C64::new(0.0, 0.0); 2] };
        assert!((lauricella_fd(&zero).unwrap() - 1.0).norm() < 1e-13);
        let bad = FdArgs { a: -0.5, ..args.clone() };
        assert!(matches!(lauricella_fd(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn fd_continuation_matches_gauss() {
        // a < 0: continued Euler integral still equals the series
        let args = FdArgs { a: -0.4, b: vec![0.7], c: 0.9, x: vec![C64::new(0.3, 0.0)] };
        let v = lauricella_fd_regularized(&args).unwrap();
        assert!(rel(v.re, gauss_2f1(-0.4, 0.7, 0.9, 0.3).unwrap()) < 1e-9, "{v}");
    }
}
