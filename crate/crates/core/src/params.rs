//! SLE parameter `kappa` and the CFT constants derived from it.
//!
//! The dense phase is `4 < kappa < 8`; `kappa <= 4` is the dilute phase.
//! The boundary value `kappa = 4` is treated as dilute.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Dense (`kappa > 4`) or dilute (`kappa <= 4`) branch of the Kac table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Dense,
    Dilute,
}

impl Phase {
    pub fn of(kappa: f64) -> Phase {
        if kappa > 4.0 {
            Phase::Dense
        } else {
            Phase::Dilute
        }
    }
}

/// Everything downstream modules need to know about `kappa`.
///
/// Built once by [`ModelParams::from_kappa`] and immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kappa: f64,
    pub phase: Phase,
    /// O(n) loop fugacity `-2 cos(4 pi / kappa)`.
    pub fugacity_n: f64,
    pub central_charge: f64,
    /// Boundary one-leg weight.
    pub theta1: f64,
    /// Bulk `2s`-leg weights for `s = 1, 2, 3` (index `s - 1`).
    pub big_theta: [f64; 3],
    /// Potts `Q = 4 cos^2(4 pi / kappa)`, forward direction only.
    pub potts_q: f64,
}

impl ModelParams {
    pub fn from_kappa(kappa: f64) -> Result<ModelParams> {
        if !(kappa > 0.0 && kappa < 8.0) {
            return Err(Error::Domain(format!("kappa = {kappa} is outside (0, 8)")));
        }
        let phase = Phase::of(kappa);
        let cos4 = (4.0 * PI / kappa).cos();
        let central_charge = (6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa);
        let big_theta = [1, 2, 3].map(|s| bulk_weight(kappa, s));
        Ok(ModelParams {
            kappa,
            phase,
            fugacity_n: -2.0 * cos4,
            central_charge,
            theta1: boundary_weight(kappa, 1),
            big_theta,
            potts_q: 4.0 * cos4 * cos4,
        })
    }

    /// Bulk `2s`-leg weight for `s >= 0`.
    pub fn bulk(&self, s: u32) -> f64 {
        match s {
            1..=3 => self.big_theta[(s - 1) as usize],
            _ => bulk_weight(self.kappa, s),
        }
    }

    /// Boundary `s`-leg weight.
    pub fn boundary(&self, s: u32) -> f64 {
        boundary_weight(self.kappa, s)
    }

    /// Kac weight on the branch of this phase.
    pub fn kac(&self, r: u32, s: u32) -> f64 {
        kac_weight(r, s, self)
    }

    /// Screening charges `(alpha_plus, alpha_minus)`.
    pub fn screening_charges(&self) -> (Charge, Charge) {
        let (ap, am) = alpha_pm(self.kappa);
        (Charge { value: ap, kind: ChargeKind::ScreeningPlus }, Charge { value: am, kind: ChargeKind::ScreeningMinus })
    }

    /// Background charge `alpha_0`, with `2 alpha_0 = alpha_+ + alpha_-`.
    pub fn alpha0(&self) -> f64 {
        let (ap, am) = alpha_pm(self.kappa);
        0.5 * (ap + am)
    }

    /// Vertex charge `alpha^{+/-}_{r,s}`.
    pub fn kac_charge(&self, r: i32, s: i32, sign: Sign) -> Charge {
        let (ap, am) = alpha_pm(self.kappa);
        let e = match sign {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        let value = 0.5 * (1.0 + e * r as f64) * ap + 0.5 * (1.0 + e * s as f64) * am;
        Charge { value, kind: ChargeKind::Kac { r, s, sign } }
    }

    /// Conformal weight `alpha (alpha - 2 alpha_0)` of a vertex charge.
    pub fn weight_of_charge(&self, alpha: f64) -> f64 {
        alpha * (alpha - 2.0 * self.alpha0())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeKind {
    Kac { r: i32, s: i32, sign: Sign },
    ScreeningPlus,
    ScreeningMinus,
}

/// A Coulomb-gas charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    pub value: f64,
    pub kind: ChargeKind,
}

fn alpha_pm(kappa: f64) -> (f64, f64) {
    let rk = kappa.sqrt();
    match Phase::of(kappa) {
        Phase::Dense => (0.5 * rk, -2.0 / rk),
        Phase::Dilute => (2.0 / rk, -0.5 * rk),
    }
}

fn bulk_weight(kappa: f64, s: u32) -> f64 {
    let s = s as f64;
    (16.0 * s * s - (kappa - 4.0).powi(2)) / (16.0 * kappa)
}

fn boundary_weight(kappa: f64, s: u32) -> f64 {
    let s = s as f64;
    s * (2.0 * s + 4.0 - kappa) / (2.0 * kappa)
}

/// Kac weight `h_{r,s}` on the branch selected by the phase of `params`.
pub fn kac_weight(r: u32, s: u32, params: &ModelParams) -> f64 {
    let k = params.kappa;
    let (r, s) = (r as f64, s as f64);
    let lead = match params.phase {
        Phase::Dense => k * r - 4.0 * s,
        Phase::Dilute => k * s - 4.0 * r,
    };
    (lead * lead - (k - 4.0).powi(2)) / (16.0 * k)
}

/// Which pair of vertex charges sits at the bulk point and its image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeCase {
    PlusPlus,
    MinusMinus,
    PlusMinus,
}

/// Number of screening charges needed for neutrality with `2N` boundary
/// one-leg operators and a bulk `2s`-leg operator.
pub fn screening_count(n_arcs: u32, s: u32, case: ChargeCase) -> Result<u32> {
    if s == 0 || s > n_arcs {
        return Err(Error::Domain(format!("need 1 <= s <= N, got s = {s}, N = {n_arcs}")));
    }
    Ok(match case {
        ChargeCase::PlusPlus => n_arcs - s,
        ChargeCase::MinusMinus => n_arcs + s,
        ChargeCase::PlusMinus => n_arcs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn percolation_values() {
        let p = ModelParams::from_kappa(6.0).unwrap();
        assert!(close(p.fugacity_n, 1.0, 1e-14));
        assert!(close(p.central_charge, 0.0, 1e-14));
        assert!(close(p.theta1, 0.0, 1e-14));
        assert!(close(p.big_theta[0], 1.0 / 8.0, 1e-14));
        assert!(close(p.big_theta[1], 5.0 / 8.0, 1e-14));
        assert!(close(2.0 * p.big_theta[1], 5.0 / 4.0, 1e-14));
    }

    #[test]
    fn ising_values() {
        let p = ModelParams::from_kappa(16.0 / 3.0).unwrap();
        assert!(close(p.fugacity_n, 2f64.sqrt(), 1e-14));
        assert!(close(p.central_charge, 0.5, 1e-14));
        assert!(close(p.theta1, 1.0 / 16.0, 1e-14));
        assert!(close(p.big_theta[1], 35.0 / 48.0, 1e-14));
        assert!(close(p.potts_q, 2.0, 1e-14));
    }

    #[test]
    fn kappa_four_is_dilute_with_n_two() {
        let p = ModelParams::from_kappa(4.0).unwrap();
        assert_eq!(p.phase, Phase::Dilute);
        assert!(close(p.fugacity_n, 2.0, 1e-14));
    }

    #[test]
    fn out_of_range_kappa() {
        for k in [0.0, -1.0, 8.0, 9.5, f64::NAN] {
            assert!(matches!(ModelParams::from_kappa(k), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn kac_examples() {
        let p = ModelParams::from_kappa(6.0).unwrap();
        assert!(close(kac_weight(1, 2, &p), 0.0, 1e-14));
        assert!(close(kac_weight(0, 1, &p), 1.0 / 8.0, 1e-14));
        for k in [2.5, 3.0, 4.5, 6.0, 7.3] {
            let p = ModelParams::from_kappa(k).unwrap();
            let theta2 = p.boundary(2);
            let h = match p.phase {
                Phase::Dense => kac_weight(1, 3, &p),
                Phase::Dilute => kac_weight(3, 1, &p),
            };
            assert!(close(h, theta2, 1e-13), "kappa {k}");
        }
    }

    #[test]
    fn weights_match_kac_table() {
        for k in [1.5, 2.0, 3.3, 4.0, 5.0, 6.0, 7.9] {
            let p = ModelParams::from_kappa(k).unwrap();
            let (t1, b1) = match p.phase {
                Phase::Dense => (kac_weight(1, 2, &p), kac_weight(0, 1, &p)),
                Phase::Dilute => (kac_weight(2, 1, &p), kac_weight(1, 0, &p)),
            };
            assert!(close(p.theta1, t1, 1e-13));
            assert!(close(p.big_theta[0], b1, 1e-13));
        }
    }

    #[test]
    fn screening_counts() {
        assert_eq!(screening_count(2, 1, ChargeCase::PlusPlus).unwrap(), 1);
        assert_eq!(screening_count(3, 3, ChargeCase::PlusPlus).unwrap(), 0);
        assert_eq!(screening_count(3, 1, ChargeCase::PlusPlus).unwrap(), 2);
        assert_eq!(screening_count(3, 1, ChargeCase::MinusMinus).unwrap(), 4);
        assert_eq!(screening_count(3, 1, ChargeCase::PlusMinus).unwrap(), 3);
        assert!(screening_count(2, 3, ChargeCase::PlusPlus).is_err());
    }

    #[test]
    fn screening_pair_identities() {
        for k in [2.0, 4.0, 5.0, 6.0, 16.0 / 3.0] {
            let p = ModelParams::from_kappa(k).unwrap();
            let (a, b) = p.screening_charges();
            assert!(close(a.value * b.value, -1.0, 1e-14));
            assert!(close(a.value + b.value, 2.0 * p.alpha0(), 1e-14));
        }
    }
}
