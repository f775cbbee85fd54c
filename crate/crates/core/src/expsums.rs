//! Exponential sums over residues and over primes with rational-function phases
//!
//! `E(n, m⃗, q) = Σ_{1≤r≤q−1} e((n r + Σ_l m_l (r + a_l)*) / q)`, with `e(x) = exp(2πix)`
//! and terms where some `r + a_l ≡ 0` skipped.
//!
//! Phases are reduced exactly in integers before any trigonometry, and the unit-circle
//! values come from a table indexed by the reduced phase, so no error accumulates
//! with the number of terms.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numthy::{batch_inverse, inverse_table, mul_mod, prime_flags, PrimeModulus};
use crate::summation::CompensatedSum;

/// Largest modulus for which full inverse and unit-circle tables are built.
pub const MAX_TABLE_MODULUS: u64 = 1 << 24;

/// Largest `x` accepted by [`prime_exp_sum`].
pub const MAX_PRIME_BOUND: u64 = 100_000_000;

/// Exponent of `q` in the prime-sum bound `q^{3/16+ε} x^{25/32}`, with `ε = 0.01`.
pub const FM_Q_EXPONENT: f64 = 3.0 / 16.0 + 0.01;

/// Exponent of `x` in the prime-sum bound.
pub const FM_X_EXPONENT: f64 = 25.0 / 32.0;

/// Phase `R(x) = n x + Σ_l m_l / (x + a_l)` with pairwise distinct pole shifts `a_l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalExponentArg {
    pub n: i64,
    pub terms: Vec<(i64, u64)>,
}

impl RationalExponentArg {
    pub fn new(n: i64, terms: Vec<(i64, u64)>) -> Result<Self> {
        let mut shifts: Vec<u64> = terms.iter().map(|&(_, a)| a).collect();
        shifts.sort_unstable();
        if shifts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidShifts(format!(
                "pole shifts must be pairwise distinct, got {:?}",
                terms.iter().map(|&(_, a)| a).collect::<Vec<_>>()
            )));
        }
        Ok(Self { n, terms })
    }

    /// Kloosterman phase `m x + n x*`.
    pub fn kloosterman(m: i64, n: i64) -> Self {
        Self {
            n: m,
            terms: vec![(n, 0)],
        }
    }

    pub fn num_poles(&self) -> usize {
        self.terms.len()
    }

    /// True if every coefficient vanishes modulo `q`.
    pub fn is_zero_mod(&self, q: u64) -> bool {
        let q = q as i64;
        self.n.rem_euclid(q) == 0 && self.terms.iter().all(|&(m, _)| m.rem_euclid(q) == 0)
    }

    fn check_shifts(&self, q: u64) -> Result<()> {
        if let Some(&(_, a)) = self.terms.iter().find(|&&(_, a)| a >= q) {
            return Err(Error::InvalidShifts(format!(
                "pole shift {a} must be below q = {q}"
            )));
        }
        Ok(())
    }

    /// Coefficients as least residues modulo `q`.
    fn reduced(&self, q: u64) -> (u64, Vec<(u64, u64)>) {
        let r = |c: i64| c.rem_euclid(q as i64) as u64;
        (
            r(self.n),
            self.terms.iter().map(|&(m, a)| (r(m), a)).collect(),
        )
    }
}

/// `e(k/q)` for `k = 0 … q−1`, each entry from one direct trigonometric call.
#[derive(Debug, Clone)]
pub struct UnitCircle {
    q: u64,
    roots: Vec<Complex64>,
}

impl UnitCircle {
    pub fn new(q: u64) -> Self {
        let roots = (0..q).map(|k| unit_root(k, q)).collect();
        Self { q, roots }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline(always)]
    pub fn get(&self, k: u64) -> Complex64 {
        self.roots[k as usize]
    }
}

/// `e(k/q)` for `0 ≤ k < q`, folding the angle into `[−π, π]`.
#[inline]
pub fn unit_root(k: u64, q: u64) -> Complex64 {
    let signed = if 2 * (k as u128) > q as u128 {
        k as f64 - q as f64
    } else {
        k as f64
    };
    let (s, c) = (TAU * (signed / q as f64)).sin_cos();
    Complex64::new(c, s)
}

/// Complex accumulator with compensated real and imaginary parts.
#[derive(Debug, Clone, Copy, Default)]
struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    #[inline(always)]
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Inverse and unit-circle tables for one prime modulus, shared across many phases.
#[derive(Debug, Clone)]
pub struct ExpSumContext {
    q: PrimeModulus,
    inv: Vec<u64>,
    circle: UnitCircle,
}

impl ExpSumContext {
    pub fn new(q: PrimeModulus) -> Result<Self> {
        if q.get() > MAX_TABLE_MODULUS {
            return Err(Error::Overflow(format!(
                "tables for q = {q} exceed {MAX_TABLE_MODULUS} entries"
            )));
        }
        Ok(Self {
            q,
            inv: inverse_table(&q),
            circle: UnitCircle::new(q.get()),
        })
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.q
    }

    /// Reduced phase `R(r) mod q`, or `None` at a pole.
    #[inline(always)]
    fn phase(&self, r: u64, n: u64, terms: &[(u64, u64)]) -> Option<u64> {
        let q = self.q.get();
        // q ≤ 2^24, so products of residues fit in u64
        let mut phase = n * r % q;
        for &(m, a) in terms {
            let mut x = r + a;
            if x >= q {
                x -= q;
            }
            if x == 0 {
                return None;
            }
            phase += m * self.inv[x as usize] % q;
            if phase >= q {
                phase -= q;
            }
        }
        Some(phase)
    }

    /// `E(n, m⃗, q)`.
    pub fn mixed_sum(&self, arg: &RationalExponentArg) -> Result<Complex64> {
        let q = self.q.get();
        arg.check_shifts(q)?;
        let (n, terms) = arg.reduced(q);
        let mut acc = ComplexSum::default();
        for r in 1..q {
            if let Some(k) = self.phase(r, n, &terms) {
                acc.add(self.circle.get(k));
            }
        }
        Ok(acc.value())
    }

    /// Partial sums `Σ_{p ≤ x} e(R(p mod q)/q)` at each checkpoint `x` (ascending),
    /// over the ascending prime list `primes`.
    pub fn prime_sums(
        &self,
        arg: &RationalExponentArg,
        primes: &[u64],
        checkpoints: &[u64],
    ) -> Result<Vec<Complex64>> {
        let q = self.q.get();
        arg.check_shifts(q)?;
        if checkpoints.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "checkpoints must be ascending".into(),
            ));
        }
        let (n, terms) = arg.reduced(q);
        let mut acc = ComplexSum::default();
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut idx = 0;
        for &x in checkpoints {
            while idx < primes.len() && primes[idx] <= x {
                if let Some(k) = self.phase(primes[idx] % q, n, &terms) {
                    acc.add(self.circle.get(k));
                }
                idx += 1;
            }
            out.push(acc.value());
        }
        Ok(out)
    }
}

/// Streaming evaluation for moduli beyond the table limit: inverses in batches
/// by prefix products, unit-circle values by direct reduced-angle trigonometry.
fn mixed_exp_sum_streaming(q: u64, arg: &RationalExponentArg) -> Result<Complex64> {
    const BATCH: u64 = 1 << 16;
    let (n, terms) = arg.reduced(q);
    let mut acc = ComplexSum::default();
    let mut start = 1;
    while start < q {
        let end = (start + BATCH).min(q);
        let mut phases: Vec<Option<u64>> = (start..end).map(|r| Some(mul_mod(n, r, q))).collect();
        for &(m, a) in &terms {
            let shifted: Vec<u64> = (start..end).map(|r| (r + a) % q).collect();
            let units: Vec<u64> = shifted
                .iter()
                .map(|&x| if x == 0 { 1 } else { x })
                .collect();
            let inv = batch_inverse(&units, q)?;
            for (i, phase) in phases.iter_mut().enumerate() {
                *phase = match (*phase, shifted[i]) {
                    (Some(_), 0) | (None, _) => None,
                    (Some(p), _) => Some((p + mul_mod(m, inv[i], q)) % q),
                };
            }
        }
        for k in phases.into_iter().flatten() {
            acc.add(unit_root(k, q));
        }
        start = end;
    }
    Ok(acc.value())
}

/// `E(n, m⃗, q)`; every pole shift must be below `q`.
pub fn mixed_exp_sum(q: PrimeModulus, arg: &RationalExponentArg) -> Result<Complex64> {
    arg.check_shifts(q.get())?;
    if q.get() <= MAX_TABLE_MODULUS {
        ExpSumContext::new(q)?.mixed_sum(arg)
    } else {
        mixed_exp_sum_streaming(q.get(), arg)
    }
}

/// Kloosterman sum `K(m, n; q) = Σ_{x≠0} e((m x + n x*)/q)`.
pub fn kloosterman(q: PrimeModulus, m: i64, n: i64) -> Result<Complex64> {
    mixed_exp_sum(q, &RationalExponentArg::kloosterman(m, n))
}

/// Bound of Weil type for `|E|` with `L` simple finite poles and a possible
/// linear term: `2L√q` from the curve, plus one for each skipped or boundary point.
pub fn weil_bound(poles: usize, q: u64) -> f64 {
    2.0 * poles as f64 * (q as f64).sqrt() + poles as f64 + 1.0
}

/// Phase with every coefficient a nonzero residue and distinct random shifts.
pub fn random_arg<R: Rng>(rng: &mut R, q: u64, poles: usize) -> Result<RationalExponentArg> {
    if poles as u64 > q {
        return Err(Error::InvalidArgument(format!(
            "{poles} distinct shifts do not fit below q = {q}"
        )));
    }
    let n = rng.gen_range(1..q) as i64;
    let mut shifts = Vec::with_capacity(poles);
    while shifts.len() < poles {
        let a = rng.gen_range(0..q);
        if !shifts.contains(&a) {
            shifts.push(a);
        }
    }
    let terms = shifts
        .into_iter()
        .map(|a| (rng.gen_range(1..q) as i64, a))
        .collect();
    RationalExponentArg::new(n, terms)
}

/// Per-modulus summary of `|E|/√q` over random phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRatioRow {
    pub q: u64,
    pub trials: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    /// `weil_bound(L, q)/√q`.
    pub weil_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRatioReport {
    pub poles: usize,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<BoundRatioRow>,
}

impl BoundRatioReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max)
    }

    /// Largest `max_ratio` over rows with `lo ≤ q ≤ hi`.
    pub fn max_ratio_in(&self, lo: u64, hi: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| (lo..=hi).contains(&r.q))
            .map(|r| r.max_ratio)
            .reduce(f64::max)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples `trials` random nonzero phases with `poles` pole terms for each `q`
/// and records the distribution of `|E|/√q`.
pub fn bound_ratio_sweep(
    q_list: &[PrimeModulus],
    poles: usize,
    trials: usize,
    seed: u64,
) -> Result<BoundRatioReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let rows = q_list
        .par_iter()
        .map(|&q| -> Result<BoundRatioRow> {
            let ctx = ExpSumContext::new(q)?;
            let mut rng = rng_for(seed, q.get());
            let sqrt_q = (q.get() as f64).sqrt();
            let mut ratios = Vec::with_capacity(trials);
            for _ in 0..trials {
                let arg = random_arg(&mut rng, q.get(), poles)?;
                ratios.push(ctx.mixed_sum(&arg)?.norm() / sqrt_q);
            }
            ratios.sort_by(f64::total_cmp);
            Ok(BoundRatioRow {
                q: q.get(),
                trials,
                max_ratio: ratios[trials - 1],
                mean_ratio: ratios.iter().sum::<f64>() / trials as f64,
                median_ratio: ratios[trials / 2],
                weil_ratio: weil_bound(poles, q.get()) / sqrt_q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundRatioReport {
        poles,
        trials,
        seed,
        rows,
    })
}

/// Largest `|K(m, n; q)|` over the grid `0 ≤ m, n < side`, skipping the trivial
/// pairs with `q | m` and `q | n`.
pub fn kloosterman_grid_max(q: PrimeModulus, side: i64) -> Result<f64> {
    let ctx = ExpSumContext::new(q)?;
    let qv = q.get() as i64;
    let mut best = 0.0f64;
    for m in 0..side {
        for n in 0..side {
            if m % qv == 0 && n % qv == 0 {
                continue;
            }
            best = best.max(
                ctx.mixed_sum(&RationalExponentArg::kloosterman(m, n))?
                    .norm(),
            );
        }
    }
    Ok(best)
}

/// `S = Σ_{p ≤ x} e(R(p mod q)/q)` over primes, skipping primes at a pole.
pub fn prime_exp_sum(q: PrimeModulus, arg: &RationalExponentArg, x: u64) -> Result<Complex64> {
    if x > MAX_PRIME_BOUND {
        return Err(Error::InvalidArgument(format!(
            "x = {x} exceeds the sieve bound {MAX_PRIME_BOUND}"
        )));
    }
    arg.check_shifts(q.get())?;
    if x < 2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let qv = q.get();
    let (n, terms) = arg.reduced(qv);
    let flags = prime_flags(x as usize);
    let mut acc = ComplexSum::default();
    'primes: for (p, _) in flags.iter().enumerate().filter(|(_, &f)| f) {
        let r = p as u64 % qv;
        let mut phase = mul_mod(n, r, qv);
        for &(m, a) in &terms {
            let shifted = (r + a) % qv;
            if shifted == 0 {
                continue 'primes;
            }
            let inv = crate::numthy::mod_inverse(shifted, qv)?;
            phase = (phase + mul_mod(m, inv, qv)) % qv;
        }
        acc.add(unit_root(phase, qv));
    }
    Ok(acc.value())
}

/// `q^{3/16+0.01} x^{25/32}`.
pub fn fouvry_michel_scale(q: u64, x: u64) -> f64 {
    (q as f64).powf(FM_Q_EXPONENT) * (x as f64).powf(FM_X_EXPONENT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeSumRow {
    pub q: u64,
    pub x: u64,
    pub max_abs: f64,
    /// `max_abs / (q^{3/16+0.01} x^{25/32})`.
    pub ratio: f64,
    /// `π(x) / (q^{3/16+0.01} x^{25/32})`, the ratio the trivial bound allows.
    pub trivial_ratio: f64,
}

/// For each `q` and each `x` in `x_list`, the largest `|S|` over `trials` random
/// phases with `poles` pole terms.
pub fn prime_sum_sweep(
    q_list: &[PrimeModulus],
    x_list: &[u64],
    poles: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<PrimeSumRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut xs = x_list.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let x_max = xs.last().copied().unwrap_or(0);
    if x_max > MAX_PRIME_BOUND {
        return Err(Error::InvalidArgument(format!(
            "x = {x_max} exceeds the sieve bound {MAX_PRIME_BOUND}"
        )));
    }
    let primes = crate::numthy::primes_up_to(x_max);
    let counts: Vec<usize> = xs
        .iter()
        .map(|&x| primes.partition_point(|&p| p <= x))
        .collect();
    let per_q = q_list
        .par_iter()
        .map(|&q| -> Result<Vec<PrimeSumRow>> {
            let ctx = ExpSumContext::new(q)?;
            let mut rng = rng_for(seed, q.get());
            let mut max_abs = vec![0.0f64; xs.len()];
            for _ in 0..trials {
                let arg = random_arg(&mut rng, q.get(), poles)?;
                for (best, s) in max_abs.iter_mut().zip(ctx.prime_sums(&arg, &primes, &xs)?) {
                    *best = best.max(s.norm());
                }
            }
            Ok(xs
                .iter()
                .zip(&counts)
                .zip(max_abs)
                .map(|((&x, &count), max_abs)| {
                    let scale = fouvry_michel_scale(q.get(), x);
                    PrimeSumRow {
                        q: q.get(),
                        x,
                        max_abs,
                        ratio: max_abs / scale,
                        trivial_ratio: count as f64 / scale,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_q.into_iter().flatten().collect())
}
