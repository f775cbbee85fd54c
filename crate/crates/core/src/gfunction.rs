//! The truncated sawtooth series `g(α; cap) = Σ_{s ≤ cap} (1 − 2{sα}) / s`.
//!
//! Off the Farey points `k/l` (`l ≤ cap`) the truncated series is linear with
//! slope `−2·cap`, so it has an exact piecewise-linear representation
//! ([`TruncatedG`]) whose moments integrate in closed form. The untruncated
//! series converges only almost everywhere and is never evaluated; every
//! μ-quantity here is indexed by its cap.
//!
//! Also provides empirical CDFs and the two-sample Kolmogorov–Smirnov distance
//! used to compare value distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numthy::gcd;
use crate::summation::CompensatedSum;

/// Largest cap accepted by [`build_piecewise`] and [`moment_exact`].
pub const MAX_CAP: u64 = 1 << 12;

/// Largest moment order accepted by [`moment_exact`].
pub const MAX_MOMENT_ORDER: u32 = 16;

/// Direct `O(cap)` evaluation of `g(α; cap)`.
pub fn g_trunc(alpha: f64, cap: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for s in 1..=cap {
        let x = s as f64 * alpha;
        let frac = x - x.floor();
        acc.add((1.0 - 2.0 * frac) / s as f64);
    }
    acc.value()
}

/// Farey sequence of order `n` (all reduced `k/l` in `[0, 1]` with `l ≤ n`), ascending.
pub fn farey_sequence(n: u32) -> Vec<(u32, u32)> {
    let n = n.max(1);
    let mut out = vec![(0, 1)];
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, n as u64);
    while c <= n as u64 {
        out.push((c as u32, d as u32));
        let k = (n as u64 + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
    }
    out
}

/// One linear piece of [`TruncatedG`] on the open interval between two
/// consecutive breakpoints; `intercept` is the right limit at `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub left: (u32, u32),
    pub right: (u32, u32),
    pub intercept: f64,
    pub slope: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        // consecutive Farey fractions a/b < c/d satisfy bc − ad = 1
        1.0 / (self.left.1 as f64 * self.right.1 as f64)
    }

    /// Value at `α` in the segment, measured from the left end.
    pub fn eval(&self, alpha: f64) -> f64 {
        let x0 = self.left.0 as f64 / self.left.1 as f64;
        self.intercept + self.slope * (alpha - x0)
    }
}

/// Exact piecewise-linear form of `g(·; cap)` on `(0, 1)`.
#[derive(Debug, Clone)]
pub struct TruncatedG {
    cap: u64,
    breakpoints: Vec<(u32, u32)>,
    /// Right limit of `g(·; cap)` at each breakpoint except the last.
    left_values: Vec<f64>,
}

/// Harmonic numbers `H_0 … H_n`.
fn harmonic_numbers(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for s in 1..=n {
        acc.add(1.0 / s as f64);
        out.push(acc.value());
    }
    out
}

/// Builds the exact piecewise-linear representation of `g(·; cap)`.
///
/// Walking the Farey sequence left to right, the value drops by `2·cap·width`
/// across each segment and jumps by `(2/l)·H_{⌊cap/l⌋}` at each reduced `k/l`
/// (every `⌊sα⌋` with `l | s` steps up by one).
pub fn build_piecewise(cap: u64) -> Result<TruncatedG> {
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be positive".into()));
    }
    if cap > MAX_CAP {
        return Err(Error::CapTooLarge { cap, max: MAX_CAP });
    }
    let breakpoints = farey_sequence(cap as u32);
    let harmonic = harmonic_numbers(cap);
    let slope = -2.0 * cap as f64;
    let mut left_values = Vec::with_capacity(breakpoints.len() - 1);
    let mut value = CompensatedSum::new();
    value.add(harmonic[cap as usize]);
    for w in breakpoints.windows(2) {
        let (left, right) = (w[0], w[1]);
        left_values.push(value.value());
        let width = 1.0 / (left.1 as f64 * right.1 as f64);
        value.add(slope * width);
        let l = right.1 as u64;
        value.add(2.0 / l as f64 * harmonic[(cap / l) as usize]);
    }
    Ok(TruncatedG {
        cap,
        breakpoints,
        left_values,
    })
}

impl TruncatedG {
    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn slope(&self) -> f64 {
        -2.0 * self.cap as f64
    }

    pub fn breakpoints(&self) -> &[(u32, u32)] {
        &self.breakpoints
    }

    pub fn num_segments(&self) -> usize {
        self.left_values.len()
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let slope = self.slope();
        self.breakpoints
            .windows(2)
            .zip(&self.left_values)
            .map(move |(w, &intercept)| Segment {
                left: w[0],
                right: w[1],
                intercept,
                slope,
            })
    }

    /// Evaluates the representation at `α ∈ (0, 1)`; at a breakpoint this is
    /// the right limit.
    pub fn eval(&self, alpha: f64) -> f64 {
        let idx = self
            .breakpoints
            .partition_point(|&(k, l)| k as f64 / l as f64 <= alpha)
            .saturating_sub(1)
            .min(self.left_values.len() - 1);
        let (k, l) = self.breakpoints[idx];
        self.left_values[idx] + self.slope() * (alpha - k as f64 / l as f64)
    }

    /// `∫_0^1 g(α; cap)^k dα`, integrated exactly per segment.
    ///
    /// On a segment with end values `a`, `b` and width `w`,
    /// `∫ (linear)^k = w/(k+1) · Σ_{i=0}^{k} a^i b^{k−i}`, which avoids the
    /// cancellation in `(b^{k+1} − a^{k+1}) / ((k+1)·slope)`.
    pub fn moment(&self, k: u32) -> f64 {
        let mut acc = CompensatedSum::new();
        for seg in self.segments() {
            let w = seg.width();
            let a = seg.intercept;
            let b = a + seg.slope * w;
            // S_j = b·S_{j−1} + a^j
            let mut sum = 1.0;
            let mut a_pow = 1.0;
            for _ in 0..k {
                a_pow *= a;
                sum = sum * b + a_pow;
            }
            acc.add(w / (k + 1) as f64 * sum);
        }
        acc.value()
    }
}

/// `∫_0^1 g(α; cap)^k dα` from the exact piecewise-linear representation.
pub fn moment_exact(cap: u64, k: u32) -> Result<f64> {
    if k > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order {k} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    Ok(build_piecewise(cap)?.moment(k))
}

/// `Σ_{l,m ≤ cap} gcd(l,m)² / (3 l² m²)`, the second moment of `g(·; cap)`
/// computed from the sawtooth correlations `∫(1−2{lα})(1−2{mα}) = gcd²/(3lm)`.
pub fn second_moment_gcd_oracle(cap: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for l in 1..=cap {
        for m in 1..=cap {
            let g = gcd(l, m) as f64;
            acc.add(g * g / (3.0 * (l * l) as f64 * (m * m) as f64));
        }
    }
    acc.value()
}

/// `lim_{cap→∞} ∫ g(·; cap)² = ζ(2)³ / (3 ζ(4)) = 5π²/36`.
pub const SECOND_MOMENT_LIMIT: f64 = 5.0 * std::f64::consts::PI * std::f64::consts::PI / 36.0;

/// Monte-Carlo estimate of `∫ g(·; cap)^k` with uniform `α`; returns `(mean, standard error)`.
pub fn moment_mc(cap: u64, k: u32, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for _ in 0..n {
        let alpha: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v = g_trunc(alpha, cap).powi(k as i32);
        sum.add(v);
        sum_sq.add(v * v);
    }
    let mean = sum.value() / n as f64;
    let var = (sum_sq.value() / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

// ⌊(√5 − 1)/2 · 2^64⌋, rounded to odd.
const GOLDEN_FRACTION_Q64: u64 = 0x9E37_79B9_7F4A_7C15;

/// Golden-ratio Kronecker sequence `α_i = {i·φ⁻¹}`, `i = 1 … n`, generated in
/// 64-bit fixed point; every point lies strictly inside `(0, 1)`.
pub fn kronecker_points(n: usize) -> impl Iterator<Item = f64> {
    (1..=n as u64).map(|i| {
        let x = i.wrapping_mul(GOLDEN_FRACTION_Q64);
        // top 53 bits, shifted off zero by half a unit
        ((x >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    })
}

/// Values `g(α_i; cap)` at the first `n` Kronecker points.
pub fn g_sample(cap: u64, n: usize) -> Vec<f64> {
    kronecker_points(n).map(|a| g_trunc(a, cap)).collect()
}

/// Estimate of `∫ f dμ_cap`, μ_cap being the law of `g(α; cap)` for uniform `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuIntegral {
    pub value: f64,
    pub cap: u64,
    pub n: usize,
}

/// Quasi-Monte-Carlo `(1/n) Σ f(g(α_i; cap))` over the Kronecker sequence.
pub fn mu_integral<F: Fn(f64) -> f64>(f: F, cap: u64, n: usize) -> MuIntegral {
    let n = n.max(1);
    let mut acc = CompensatedSum::new();
    for a in kronecker_points(n) {
        acc.add(f(g_trunc(a, cap)));
    }
    MuIntegral {
        value: acc.value() / n as f64,
        cap,
        n,
    }
}

/// As [`mu_integral`], over precomputed `g` values.
pub fn mu_integral_from_sample<F: Fn(f64) -> f64>(f: F, sample: &[f64], cap: u64) -> MuIntegral {
    let acc: CompensatedSum = sample.iter().map(|&x| f(x)).sum();
    MuIntegral {
        value: acc.value() / sample.len().max(1) as f64,
        cap,
        n: sample.len(),
    }
}

/// Right-continuous empirical distribution function of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `≤ z`.
    pub fn eval(&self, z: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= z) as f64 / self.sorted.len() as f64
    }
}

/// Two-sample Kolmogorov–Smirnov distance `sup_z |F1(z) − F2(z)|`, evaluated
/// after every jump of either step function.
pub fn ks_distance(e1: &EmpiricalCdf, e2: &EmpiricalCdf) -> f64 {
    let (a, b) = (e1.sorted(), e2.sorted());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let z = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= z {
            i += 1;
        }
        while j < b.len() && b[j] <= z {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}
