//! Numerical toolkit for shifted cotangent sums.
//!
//! The crate evaluates the cotangent sum `c0(r/b)`, the Vasyunin sum `V(r/b)`
//! and the floor-weighted sum `Q(r/q)`, decomposes `Q` into its pole-dominated
//! and cancelling parts, and runs the statistical experiments that compare the
//! value distribution of `c0((r + a)/q) / q` over a numerator window against the
//! distribution of the sawtooth series `g(α) = Σ (1 − 2{lα}) / l`.
//!
//! Modules:
//!
//! - [`numthy`]: gcd, modular inverses, 64-bit primality, windows and shifts.
//! - [`cotangent`]: `c0`, `V`, `Q`, the block decomposition and the `Q0/Q1` split.
//! - [`gfunction`]: the truncated series `g(·; cap)`, its exact piecewise-linear
//!   form, exact moments, μ-integrals and empirical CDF tools.
//! - [`expsums`]: mixed Kloosterman-type exponential sums and their bounds.
//! - [`experiments`]: equidistribution counts, joint moments, distributional
//!   checks, reports and the batch config runner.
//! - [`zeta`]: `ζ(1/2 + it)` on the critical line and the weighted
//!   `|ζ|²` integral identity involving Vasyunin sums.

pub mod cotangent;
pub mod error;
pub mod experiments;
pub mod expsums;
pub mod format;
pub mod gfunction;
pub mod numthy;
pub mod summation;
pub mod zeta;

pub use error::{Error, Result};
