//! Pinch-point densities of critical boundary clusters in polygons.
//!
//! The crate evaluates conformal-field-theory predictions for the density of
//! points where `s` distinct boundary arcs touch inside a rectangle or a
//! hexagon with alternating wired/free sides, and checks them against a
//! Monte Carlo engine built on hull walks and Swendsen-Wang sampling.
//!
//! Layout, bottom up:
//!
//! * [`params`]: the SLE parameter `kappa` and everything derived from it.
//! * [`specfun`]: Gamma, Gauss and Lauricella hypergeometric functions,
//!   elliptic integrals and Jacobi functions.
//! * [`quad`]: quadrature for branched power-product integrands along
//!   segments, rays, polylines and Pochhammer-regularized segments.
//! * [`scmap`]: Schwarz-Christoffel maps for the rectangle and the hexagon.
//! * [`theory`]: half-plane weights, partition functions and densities.
//! * [`mc`]: hull walks, Swendsen-Wang dynamics and tallies.
//! * [`harness`]: configuration, grids, comparison tables and the CLI.

pub mod error;
pub mod harness;
pub mod mc;
pub mod params;
pub mod quad;
pub mod scmap;
pub mod specfun;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
