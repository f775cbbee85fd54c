//! `ζ(1/2 + it)` on the critical line and the weighted mean-square identity
//!
//! `(1/(2π√(rb))) ∫_ℝ |ζ(1/2+it)|² (r/b)^{it} dt/(1/4+t²)
//!   = (log 2π − γ)/2·(1/r + 1/b) + (b−r)/(2rb)·log(r/b) − π/(2rb)·(V(r/b) + V(b/r))`.
//!
//! The left side is integrated over `[0, T]` (the imaginary part cancels by symmetry)
//! from a tabulated `|ζ|²`, with an empirical tail model reported as uncertainty.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cotangent::{vasyunin, FareyFraction};
use crate::error::{Error, Result};
use crate::numthy::gcd;
use crate::summation::CompensatedSum;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// `log 2π`.
pub const LOG_2PI: f64 = 1.837_877_066_409_345_483_560_659_472_811_235_3;

/// Largest `|t|` accepted by [`zeta_half_line`].
pub const MAX_HEIGHT: f64 = 1e6;

/// Largest admissible quadrature step.
pub const MAX_STEP: f64 = 0.05;

/// `C` in the tail model `C (log T)² / T`, fitted on `r = b = 1`
/// (see [`fit_tail_constant`]).
pub const TAIL_CONSTANT: f64 = 0.05;

/// Minimum grid points per period of `cos(t log(r/b))`.
const POINTS_PER_PERIOD: f64 = 8.0;

/// Rotations between exact reseeds in [`ZetaTable`].
const RESEED_INTERVAL: usize = 256;

/// `B_{2k}` for `k = 1 … 8`.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Floor on the Dirichlet terms, which keeps the asymptotic remainder small near `t = 0`.
const MIN_MAIN_TERMS: usize = 12;

/// Number of Dirichlet terms used at height `t`.
fn main_terms(t: f64) -> usize {
    (3 + t.abs().ceil() as usize).max(MIN_MAIN_TERMS)
}

/// Euler–Maclaurin remainder at `N`: `N^{1−s}/(s−1) + N^{−s}/2 + Σ_k B_{2k}/(2k)! (s)_{2k−1} N^{−s−2k+1}`.
fn em_tail(s: Complex64, n: usize) -> Complex64 {
    let nf = n as f64;
    let n_pow = (-s * nf.ln()).exp();
    let mut out = n_pow * nf / (s - 1.0) + n_pow * 0.5;
    // term_k = B_{2k}/(2k)! · s(s+1)…(s+2k−2) · N^{−s−2k+1}
    let mut rising = s * n_pow / nf;
    let mut factorial = 2.0;
    for (k, &b) in BERNOULLI.iter().enumerate() {
        out += rising * (b / factorial);
        let j = 2.0 * (k + 1) as f64;
        rising *= (s + (j - 1.0)) * (s + j) / (nf * nf);
        factorial *= (j + 1.0) * (j + 2.0);
    }
    out
}

/// Euler–Maclaurin evaluation of `ζ(s)` with `n` main terms; `s ≠ 1`.
pub fn zeta_em(s: Complex64, n: usize) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for k in 1..n {
        let z = (-s * (k as f64).ln()).exp();
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value()) + em_tail(s, n)
}

/// `ζ(1/2 + it)` for `|t| ≤ 10^6`.
pub fn zeta_half_line(t: f64) -> Result<Complex64> {
    if !t.is_finite() || t.abs() > MAX_HEIGHT {
        return Err(Error::InvalidArgument(format!(
            "|t| must be at most {MAX_HEIGHT}, got {t}"
        )));
    }
    Ok(zeta_em(Complex64::new(0.5, t), main_terms(t)))
}

/// Riemann–Siegel `θ(t)` from its asymptotic expansion; accurate to about `1e-9` for `t ≥ 10`.
pub fn riemann_siegel_theta(t: f64) -> f64 {
    t / 2.0 * (t / (2.0 * PI)).ln() - t / 2.0 - PI / 8.0
        + 1.0 / (48.0 * t)
        + 7.0 / (5760.0 * t.powi(3))
        + 31.0 / (80640.0 * t.powi(5))
}

/// Hardy's `Z(t) = e^{iθ(t)} ζ(1/2+it)`, real for real `t`.
pub fn hardy_z(t: f64) -> Result<f64> {
    let z = zeta_half_line(t)?;
    Ok((Complex64::from_polar(1.0, riemann_siegel_theta(t)) * z).re)
}

/// Locates a sign change of `Z` in `[lo, hi]` by bisection.
pub fn bisect_zero(mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = hardy_z(lo)?;
    if f_lo * hardy_z(hi)? > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Z(t) has no sign change on [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = hardy_z(mid)?;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `|ζ(1/2 + i j h)|²` on the grid `j = 0 … m`.
///
/// Blocks of [`RESEED_INTERVAL`] points start from exact phases `n^{−it}` and
/// advance by multiplying with `n^{−ih}`, so rounding drift is bounded per block.
#[derive(Debug, Clone)]
pub struct ZetaTable {
    step: f64,
    values: Vec<f64>,
}

impl ZetaTable {
    pub fn new(t_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= MAX_STEP) {
            return Err(Error::InvalidArgument(format!(
                "step must lie in (0, {MAX_STEP}], got {step}"
            )));
        }
        if !(t_max > 0.0 && t_max <= MAX_HEIGHT) {
            return Err(Error::InvalidArgument(format!(
                "table height must lie in (0, {MAX_HEIGHT}], got {t_max}"
            )));
        }
        let m = (t_max / step).ceil() as usize;
        let blocks: Vec<usize> = (0..=m).step_by(RESEED_INTERVAL).collect();
        let values = blocks
            .par_iter()
            .map(|&j0| {
                let j1 = (j0 + RESEED_INTERVAL).min(m + 1);
                let n = main_terms((j1 - 1) as f64 * step);
                let t0 = j0 as f64 * step;
                let mut phase = Vec::with_capacity(n);
                let mut rotation = Vec::with_capacity(n);
                for k in 1..n {
                    let log_k = (k as f64).ln();
                    phase.push(Complex64::from_polar(
                        (k as f64).sqrt().recip(),
                        -t0 * log_k,
                    ));
                    rotation.push(Complex64::from_polar(1.0, -step * log_k));
                }
                (j0..j1)
                    .map(|j| {
                        let s = Complex64::new(0.5, j as f64 * step);
                        let mut sum = Complex64::new(0.0, 0.0);
                        for (p, r) in phase.iter_mut().zip(&rotation) {
                            sum += *p;
                            *p *= *r;
                        }
                        (sum + em_tail(s, n)).norm_sqr()
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(Self { step, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|ζ(1/2 + i j h)|²`.
    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }
}

/// Coprime positive integers `(r, b)` in either order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoprimePair {
    pub r: u64,
    pub b: u64,
}

impl CoprimePair {
    pub fn new(r: u64, b: u64) -> Result<Self> {
        if r == 0 || b == 0 {
            return Err(Error::InvalidArgument(format!(
                "r and b must be positive, got {r}, {b}"
            )));
        }
        let g = gcd(r, b);
        if g != 1 {
            return Err(Error::NotCoprime { a: r, m: b, gcd: g });
        }
        Ok(Self { r, b })
    }

    pub fn swapped(&self) -> Self {
        Self {
            r: self.b,
            b: self.r,
        }
    }

    /// `log(r/b)`, the frequency of `(r/b)^{it}`.
    pub fn log_ratio(&self) -> f64 {
        (self.r as f64).ln() - (self.b as f64).ln()
    }
}

impl From<FareyFraction> for CoprimePair {
    fn from(f: FareyFraction) -> Self {
        Self { r: f.r(), b: f.b() }
    }
}

/// Truncation height and step of the left-side quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub t_max: f64,
    pub step: f64,
    /// `TAIL_CONSTANT·(log T)²/T`.
    pub tail_estimate: f64,
}

impl QuadratureSpec {
    pub fn new(t_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= MAX_STEP) {
            return Err(Error::InvalidArgument(format!(
                "step must lie in (0, {MAX_STEP}], got {step}"
            )));
        }
        if !(t_max > 1.0 && t_max <= MAX_HEIGHT) {
            return Err(Error::InvalidArgument(format!(
                "T must lie in (1, {MAX_HEIGHT}], got {t_max}"
            )));
        }
        Ok(Self {
            t_max,
            step,
            tail_estimate: tail_model(t_max),
        })
    }
}

/// `TAIL_CONSTANT·(log T)²/T`.
pub fn tail_model(t_max: f64) -> f64 {
    TAIL_CONSTANT * t_max.ln().powi(2) / t_max
}

/// Left side of the identity with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhsValue {
    pub value: f64,
    /// Richardson estimate of the Simpson error.
    pub quadrature_error: f64,
    pub tail_estimate: f64,
    /// Height actually reached (a whole number of quadrature panels).
    pub t_max: f64,
}

impl LhsValue {
    pub fn uncertainty(&self) -> f64 {
        self.quadrature_error + self.tail_estimate
    }
}

/// Composite Simpson over `f(j)`, `j = 0 … n` with `n` even.
fn simpson(n: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let mut acc = CompensatedSum::new();
    acc.add(f(0) + f(n));
    for j in 1..n {
        acc.add(if j % 2 == 1 { 4.0 } else { 2.0 } * f(j));
    }
    acc.value() * h / 3.0
}

/// Refinement factor of the panel next to `t = 0`, where the weight peaks.
const NEAR_ZERO_REFINEMENT: usize = 8;

/// `(1/(2π√(rb))) ∫_{−T}^{T} |ζ(1/2+it)|² (r/b)^{it} dt/(1/4+t²)`, as twice the
/// cosine integral over `[0, T]`.
///
/// `[0, 1]` is integrated with step `h/8` from direct evaluations, the rest from
/// `table`, whose step must equal `spec.step`.
pub fn lhs_integral(
    pair: CoprimePair,
    table: &ZetaTable,
    spec: &QuadratureSpec,
) -> Result<LhsValue> {
    let h = spec.step;
    if (table.step() - h).abs() > 1e-15 * h {
        return Err(Error::InvalidArgument(format!(
            "table step {} differs from quadrature step {h}",
            table.step()
        )));
    }
    let freq = pair.log_ratio();
    if freq != 0.0 && h > 2.0 * PI / freq.abs() / POINTS_PER_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "step {h} exceeds 1/{POINTS_PER_PERIOD} of the oscillation period {} of (r/b)^(it)",
            2.0 * PI / freq.abs()
        )));
    }
    // coarse panels come in groups of four so that the doubled step is also even
    let head = 4 * (1.0 / (4.0 * h)).ceil() as usize;
    let total = 4 * (spec.t_max / (4.0 * h)).round() as usize;
    if total <= head {
        return Err(Error::InvalidArgument(format!(
            "T = {} is below the refined head panel",
            spec.t_max
        )));
    }
    if total >= table.len() {
        return Err(Error::InvalidArgument(format!(
            "T = {} exceeds the table height {}",
            spec.t_max,
            table.t_max()
        )));
    }
    let weight = |t: f64| (t * freq).cos() / (0.25 + t * t);

    let fine_h = h / NEAR_ZERO_REFINEMENT as f64;
    let fine_n = head * NEAR_ZERO_REFINEMENT;
    let fine: Vec<f64> = (0..=fine_n)
        .map(|j| {
            let t = j as f64 * fine_h;
            zeta_half_line(t).map(|z| z.norm_sqr() * weight(t))
        })
        .collect::<Result<_>>()?;
    let head_fine = simpson(fine_n, fine_h, |j| fine[j]);
    let head_coarse = simpson(fine_n / 2, 2.0 * fine_h, |j| fine[2 * j]);

    let body = |j: usize| {
        let t = (head + j) as f64 * h;
        table.get(head + j) * weight(t)
    };
    let n = total - head;
    let body_fine = simpson(n, h, body);
    let body_coarse = simpson(n / 2, 2.0 * h, |j| body(2 * j));

    let integral = head_fine + body_fine;
    let richardson = ((head_fine - head_coarse).abs() + (body_fine - body_coarse).abs()) / 15.0;
    let scale = 1.0 / (PI * ((pair.r as f64) * (pair.b as f64)).sqrt());
    Ok(LhsValue {
        value: scale * integral,
        quadrature_error: scale * richardson,
        tail_estimate: spec.tail_estimate,
        t_max: total as f64 * h,
    })
}

/// `(log 2π − γ)/2·(1/r + 1/b) + (b−r)/(2rb)·log(r/b) − π/(2rb)·(V(r/b) + V(b/r))`.
pub fn rhs_closed_form(pair: CoprimePair) -> Result<f64> {
    let (r, b) = (pair.r as f64, pair.b as f64);
    let v_rb = vasyunin(&FareyFraction::reduced(pair.r, pair.b)?);
    let v_br = vasyunin(&FareyFraction::reduced(pair.b, pair.r)?);
    Ok((LOG_2PI - EULER_GAMMA) / 2.0 * (1.0 / r + 1.0 / b)
        + (b - r) / (2.0 * r * b) * pair.log_ratio()
        - PI / (2.0 * r * b) * (v_rb + v_br))
}

/// Both sides of the identity at one fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub r: u64,
    pub b: u64,
    pub t_max: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub uncertainty: f64,
}

pub fn residual(pair: CoprimePair, table: &ZetaTable, spec: &QuadratureSpec) -> Result<Residual> {
    let lhs = lhs_integral(pair, table, spec)?;
    let rhs = rhs_closed_form(pair)?;
    Ok(Residual {
        r: pair.r,
        b: pair.b,
        t_max: lhs.t_max,
        lhs: lhs.value,
        rhs,
        gap: (lhs.value - rhs).abs(),
        uncertainty: lhs.uncertainty(),
    })
}

/// Fits `C` in `C (log T)²/T` as the largest `(rhs − lhs)·T/(log T)²` over the
/// given heights, at `r = b = 1`.
pub fn fit_tail_constant(table: &ZetaTable, heights: &[f64]) -> Result<f64> {
    let unit = CoprimePair::new(1, 1)?;
    let exact = rhs_closed_form(unit)?;
    let mut best = 0.0f64;
    for &t in heights {
        let spec = QuadratureSpec::new(t, table.step())?;
        let lhs = lhs_integral(unit, table, &spec)?;
        best = best.max((exact - lhs.value) * lhs.t_max / lhs.t_max.ln().powi(2));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_at_half() {
        let z = zeta_half_line(0.0).unwrap();
        assert!((z.re + 1.4603545088095868).abs() < 1e-10 && z.im.abs() < 1e-15);
    }

    #[test]
    fn zeta_off_line_known_values() {
        // ζ(2) = π²/6, ζ(−1) = −1/12, ζ(3) = 1.2020569031595942…
        let z2 = zeta_em(Complex64::new(2.0, 0.0), 10);
        assert!((z2.re - PI * PI / 6.0).abs() < 1e-13);
        let zm1 = zeta_em(Complex64::new(-1.0, 0.0), 10);
        assert!((zm1.re + 1.0 / 12.0).abs() < 1e-13);
        let z3 = zeta_em(Complex64::new(3.0, 0.0), 10);
        assert!((z3.re - 1.202_056_903_159_594_2).abs() < 1e-13);
    }

    #[test]
    fn conjugate_symmetry() {
        for t in [0.3, 7.0, 14.1, 150.25, 2000.5] {
            let a = zeta_half_line(t).unwrap();
            let b = zeta_half_line(-t).unwrap();
            assert!((a - b.conj()).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn first_zero() {
        let t0 = bisect_zero(14.13, 14.14, 1e-10).unwrap();
        assert!((t0 - 14.134_725_141_734_693).abs() < 1e-8);
        assert!(zeta_half_line(t0).unwrap().norm() <= 1e-4);
    }

    #[test]
    fn table_matches_direct() {
        let table = ZetaTable::new(300.0, 0.05).unwrap();
        for j in [0usize, 1, 255, 256, 257, 1000, 4321, 6000] {
            let t = j as f64 * 0.05;
            let direct = zeta_half_line(t).unwrap().norm_sqr();
            assert!(
                (table.get(j) - direct).abs() < 1e-10 * direct.max(1.0),
                "t={t}"
            );
        }
    }

    #[test]
    fn rhs_examples() {
        let one = rhs_closed_form(CoprimePair::new(1, 1).unwrap()).unwrap();
        assert!((one - (LOG_2PI - EULER_GAMMA)).abs() < 1e-15);
        let half = rhs_closed_form(CoprimePair::new(1, 2).unwrap()).unwrap();
        let expected = (LOG_2PI - EULER_GAMMA) * 0.75 + 0.25 * 0.5f64.ln();
        assert!((half - expected).abs() < 1e-15);
        for (r, b) in [(1, 2), (3, 5), (2, 7), (13, 4)] {
            let p = CoprimePair::new(r, b).unwrap();
            let a = rhs_closed_form(p).unwrap();
            let s = rhs_closed_form(p.swapped()).unwrap();
            assert!((a - s).abs() < 1e-13, "({r},{b})");
        }
    }

    #[test]
    fn guards() {
        assert!(QuadratureSpec::new(100.0, 0.06).is_err());
        assert!(CoprimePair::new(4, 6).is_err());
        assert!(zeta_half_line(2e6).is_err());
        let table = ZetaTable::new(50.0, 0.05).unwrap();
        let spec = QuadratureSpec::new(40.0, 0.05).unwrap();
        // period 2π/log(10^9) ≈ 0.30 leaves under 8 points per period at h = 0.05
        let far = CoprimePair::new(1, 1_000_000_000).unwrap();
        assert!(lhs_integral(far, &table, &spec).is_err());
        let high = QuadratureSpec::new(60.0, 0.05).unwrap();
        assert!(lhs_integral(CoprimePair::new(1, 1).unwrap(), &table, &high).is_err());
    }
}
