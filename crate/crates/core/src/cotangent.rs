//! Cotangent sums `c0(r/b)`, Vasyunin sums `V(r/b)` and the floor-weighted sum
//! `Q(r/q)`, together with the block decomposition of `Q` and its split into a
//! pole-dominated part `Q0` and a remainder `Q1`.
//!
//! Every cotangent is evaluated as `cot(π k / b)` from an exactly reduced
//! integer numerator `k = m·r mod b`; floating point never sees the product
//! `m·r`. Sums run in ascending `m` with compensated accumulation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunction::g_trunc;
use crate::numthy::{gcd, mod_inverse, q_star, PrimeModulus};
use crate::summation::CompensatedSum;

/// `cot(π k / b)` for `k ≢ 0 (mod b)`.
///
/// The argument is folded into `(0, 1/2]` with integer arithmetic; near the
/// pole the cotangent is taken as `1/tan`, elsewhere as `tan(π(b − 2k)/(2b))`.
#[inline]
pub fn cot_pi_frac(k: u64, b: u64) -> f64 {
    let k = k % b;
    debug_assert!(k != 0, "cot(πk/b) has a pole at k ≡ 0");
    if 2 * (k as u128) > b as u128 {
        return -cot_pi_frac(b - k, b);
    }
    if 4 * (k as u128) <= b as u128 {
        1.0 / (PI * (k as f64 / b as f64)).tan()
    } else {
        let num = b as u128 - 2 * k as u128;
        (PI * (num as f64 / (2 * b as u128) as f64)).tan()
    }
}

/// A reduced fraction `r/b` with `1 ≤ r ≤ b`.
///
/// `b = 1` is admitted only as `1/1`, where the sums below are empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FareyFraction {
    r: u64,
    b: u64,
}

impl FareyFraction {
    pub fn new(r: u64, b: u64) -> Result<Self> {
        if b == 0 || r == 0 || r > b {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r <= b, got r = {r}, b = {b}"
            )));
        }
        let g = gcd(r, b);
        if g != 1 {
            return Err(Error::NotCoprime { a: r, m: b, gcd: g });
        }
        Ok(Self { r, b })
    }

    /// Reduces a coprime numerator modulo `b`; the sums here only depend on `r mod b`.
    pub fn reduced(r: u64, b: u64) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidArgument(
                "denominator must be positive".into(),
            ));
        }
        let g = gcd(r, b);
        if g != 1 {
            return Err(Error::NotCoprime { a: r, m: b, gcd: g });
        }
        if b == 1 {
            return Ok(Self { r: 1, b: 1 });
        }
        Self::new(r % b, b)
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    /// The fraction `r̄/b` with `r·r̄ ≡ 1 (mod b)`.
    pub fn inverse(&self) -> Self {
        if self.b == 1 {
            return *self;
        }
        let inv = mod_inverse(self.r, self.b).expect("reduced fraction has a unit numerator");
        Self { r: inv, b: self.b }
    }
}

/// Precomputed `cot(π k / b)` for `k = 0 … b−1` (entry 0 is unused).
#[derive(Debug, Clone)]
pub struct CotTable {
    b: u64,
    values: Vec<f64>,
}

/// Largest denominator for which a full table is built.
pub const MAX_TABLE_DENOMINATOR: u64 = 1 << 24;

impl CotTable {
    pub fn new(b: u64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidArgument(format!(
                "table denominator must be >= 2, got {b}"
            )));
        }
        if b > MAX_TABLE_DENOMINATOR {
            return Err(Error::Overflow(format!(
                "cotangent table for b = {b} exceeds {MAX_TABLE_DENOMINATOR} entries"
            )));
        }
        let mut values = vec![0.0; b as usize];
        let half = b / 2;
        for k in 1..=half {
            let c = cot_pi_frac(k, b);
            values[k as usize] = c;
            values[(b - k) as usize] = -c;
        }
        if b.is_multiple_of(2) {
            values[half as usize] = 0.0;
        }
        Ok(Self { b, values })
    }

    pub fn denominator(&self) -> u64 {
        self.b
    }

    #[inline(always)]
    pub fn get(&self, k: u64) -> f64 {
        self.values[k as usize]
    }

    /// `c0(r/b)` for `gcd(r, b) = 1`, using the table.
    pub fn c0(&self, r: u64) -> f64 {
        let b = self.b;
        let step = r % b;
        let mut k = 0u64;
        let mut acc = CompensatedSum::new();
        for m in 1..b {
            k += step;
            if k >= b {
                k -= b;
            }
            acc.add(m as f64 * self.values[k as usize]);
        }
        -acc.value() / b as f64
    }

    /// `V(r/b) = Σ {m r / b}·cot(π m / b)` for `gcd(r, b) = 1`, using the table.
    pub fn vasyunin(&self, r: u64) -> f64 {
        let b = self.b;
        let step = r % b;
        let mut k = 0u64;
        let mut acc = CompensatedSum::new();
        for m in 1..b {
            k += step;
            if k >= b {
                k -= b;
            }
            acc.add(k as f64 * self.values[m as usize]);
        }
        acc.value() / b as f64
    }

    /// `Q(r/b) = Σ cot(π m r / b)·⌊m r / b⌋` for `1 ≤ r < b`.
    pub fn q_sum(&self, r: u64) -> f64 {
        let b = self.b;
        let mut k = 0u64;
        let mut floor = 0u64;
        let mut acc = CompensatedSum::new();
        for _ in 1..b {
            k += r;
            if k >= b {
                k -= b;
                floor += 1;
            }
            acc.add(floor as f64 * self.values[k as usize]);
        }
        acc.value()
    }
}

/// Double-double arithmetic for the scalar sums, so that single evaluations
/// round correctly in the last place.
mod dd {
    use std::f64::consts::PI;

    /// `π` as an unevaluated sum `hi + lo`.
    const PI_DD: (f64, f64) = (PI, 1.224_646_799_147_353_2e-16);

    pub type Dd = (f64, f64);

    #[inline]
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        (s, b - (s - a))
    }

    #[inline]
    pub fn add(a: Dd, b: Dd) -> Dd {
        let (s, e) = two_sum(a.0, b.0);
        quick_two_sum(s, e + a.1 + b.1)
    }

    #[inline]
    pub fn mul(a: Dd, b: Dd) -> Dd {
        let p = a.0 * b.0;
        let e = a.0.mul_add(b.0, -p);
        quick_two_sum(p, e + a.0 * b.1 + a.1 * b.0)
    }

    #[inline]
    pub fn div(a: Dd, b: Dd) -> Dd {
        let q1 = a.0 / b.0;
        let r = add(a, mul((-q1, 0.0), b));
        let q2 = r.0 / b.0;
        let r = add(r, mul((-q2, 0.0), b));
        let q3 = r.0 / b.0;
        add(quick_two_sum(q1, q2), (q3, 0.0))
    }

    /// `n / d` for integers below `2^53`.
    pub fn ratio(n: u64, d: u64) -> Dd {
        div((n as f64, 0.0), (d as f64, 0.0))
    }

    /// `cot(π n / d)` for `0 < n/d ≤ 1/2`.
    pub fn cot_pi(n: u64, d: u64) -> Dd {
        let x = mul(PI_DD, ratio(n, d));
        let x2 = mul(x, x);
        // Taylor series of sin and cos; |x| ≤ π/2 needs 30 terms for 1e-32.
        let (mut sin, mut cos) = ((0.0, 0.0), (0.0, 0.0));
        let (mut ts, mut tc) = (x, (1.0, 0.0));
        for k in 0..30u32 {
            sin = add(sin, ts);
            cos = add(cos, tc);
            let (a, b) = (
                ((2 * k + 2) * (2 * k + 3)) as f64,
                ((2 * k + 1) * (2 * k + 2)) as f64,
            );
            ts = div(mul(ts, (-x2.0, -x2.1)), (a, 0.0));
            tc = div(mul(tc, (-x2.0, -x2.1)), (b, 0.0));
        }
        div(cos, sin)
    }
}

/// `cot(π k / b)` in double-double precision, `k ≢ 0 (mod b)`.
fn cot_pi_frac_dd(k: u64, b: u64) -> dd::Dd {
    let k = k % b;
    if 2 * (k as u128) > b as u128 {
        let (hi, lo) = cot_pi_frac_dd(b - k, b);
        return (-hi, -lo);
    }
    if 2 * (k as u128) == b as u128 {
        return (0.0, 0.0);
    }
    dd::cot_pi(k, b)
}

/// `c0(r/b) = −Σ_{m<b} (m/b)·cot(π m r / b)`; zero for `b = 1`.
///
/// Evaluated in double-double arithmetic; [`CotTable::c0`] is the fast path.
pub fn c0(f: &FareyFraction) -> f64 {
    let (r, b) = (f.r, f.b);
    if b < 2 {
        return 0.0;
    }
    let cots: Vec<dd::Dd> = (1..=b / 2).map(|k| cot_pi_frac_dd(k, b)).collect();
    let cot = |k: u64| {
        if 2 * k <= b {
            cots[k as usize - 1]
        } else {
            let c = cots[(b - k) as usize - 1];
            (-c.0, -c.1)
        }
    };
    let mut k = 0u64;
    let mut acc = (0.0, 0.0);
    for m in 1..b {
        k = (k + r) % b;
        acc = dd::add(acc, dd::mul((m as f64, 0.0), cot(k)));
    }
    let v = dd::div(acc, (b as f64, 0.0));
    -(v.0 + v.1)
}

/// Vasyunin sum `V(r/b) = Σ_{m<b} {m r / b}·cot(π m / b)`; zero for `b = 1`.
///
/// This is the normalization satisfying `V(r/b) = −c0(r̄/b)`.
pub fn vasyunin(f: &FareyFraction) -> f64 {
    let (r, b) = (f.r, f.b);
    if b < 2 {
        return 0.0;
    }
    let mut k = 0u64;
    let mut acc = (0.0, 0.0);
    for m in 1..b {
        k = (k + r) % b;
        acc = dd::add(acc, dd::mul((k as f64, 0.0), cot_pi_frac_dd(m, b)));
    }
    let v = dd::div(acc, (b as f64, 0.0));
    v.0 + v.1
}

fn check_numerator(r: u64, q: &PrimeModulus) -> Result<()> {
    let qv = q.get();
    if r == 0 || r >= qv {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= r < q, got r = {r}, q = {qv}"
        )));
    }
    Ok(())
}

/// `Q(r/q) = Σ_{m<q} cot(π m r / q)·⌊m r / q⌋` for `1 ≤ r < q`.
pub fn q_sum(r: u64, q: &PrimeModulus) -> Result<f64> {
    check_numerator(r, q)?;
    let qv = q.get();
    let mut k = 0u64;
    let mut floor = 0u64;
    let mut acc = CompensatedSum::new();
    for _ in 1..qv {
        k += r;
        if k >= qv {
            k -= qv;
            floor += 1;
        }
        acc.add(floor as f64 * cot_pi_frac(k, qv));
    }
    Ok(acc.value())
}

/// One block of the decomposition: the multiples of `r_eff` in `[q j, q (j+1))`
/// are `q j + s + h·r_eff` for `h = 0 … d`, and `t` closes the block:
/// `q j + s + d·r_eff + t = q (j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRow {
    pub s: u64,
    pub d: u64,
    pub t: u64,
}

/// Blocks `j = 0 … r_eff−1` covering the multiples `r_eff·m`, `1 ≤ m ≤ q−1`.
///
/// Row 0 starts at the first positive multiple, so `s_0 = r_eff`; for `j ≥ 1`,
/// `0 < s_j < r_eff`. Always `0 < t_j ≤ r_eff`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubintervalDecomposition {
    pub r_eff: u64,
    pub q: PrimeModulus,
    pub rows: Vec<BlockRow>,
}

impl SubintervalDecomposition {
    /// The cotangent numerators `(q j + s_j + h r_eff) mod q = s_j + h r_eff` of block `j`.
    pub fn block_numerators(&self, j: usize) -> impl Iterator<Item = u64> + '_ {
        let row = self.rows[j];
        (0..=row.d).map(move |h| row.s + h * self.r_eff)
    }
}

/// Builds the block decomposition arithmetically in `O(r_eff)`.
pub fn decompose(r_eff: u64, q: &PrimeModulus) -> Result<SubintervalDecomposition> {
    let qv = q.get();
    if r_eff < 2 || r_eff >= qv {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= r_eff < q, got r_eff = {r_eff}, q = {qv}"
        )));
    }
    let g = gcd(r_eff, qv);
    if g != 1 {
        return Err(Error::NotCoprime {
            a: r_eff,
            m: qv,
            gcd: g,
        });
    }
    let qr = (qv % r_eff) as u128;
    let rows = (0..r_eff)
        .map(|j| {
            let s = if j == 0 {
                r_eff
            } else {
                let rem = (qr * j as u128 % r_eff as u128) as u64;
                r_eff - rem
            };
            let start = qv as u128 * j as u128 + s as u128;
            let first = start / r_eff as u128;
            let last = (qv as u128 * (j as u128 + 1) - 1) / r_eff as u128;
            let d = (last - first) as u64;
            let t = (qv as u128 * (j as u128 + 1) - r_eff as u128 * last) as u64;
            BlockRow { s, d, t }
        })
        .collect();
    Ok(SubintervalDecomposition { r_eff, q: *q, rows })
}

/// How the block-selection threshold for `Q0` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// `s_j / r_eff ≤ 2^m1 / q` (or the same for `t_j`): the fractional-part
    /// test `{±j q / r_eff} ≤ 2^m1 / q` in exact integer form.
    #[default]
    Scaled,
    /// `s_j ≤ 2^m1` (or `t_j ≤ 2^m1`): the offsets themselves are bounded.
    Unscaled,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(Self::Scaled),
            "unscaled" => Ok(Self::Unscaled),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection mode `{other}`"
            ))),
        }
    }
}

impl SelectionMode {
    #[inline]
    fn admits(self, offset: u64, r_eff: u64, q: u64, m1: u32) -> bool {
        let cap = 1u128 << m1;
        match self {
            Self::Scaled => offset as u128 * q as u128 <= r_eff as u128 * cap,
            Self::Unscaled => offset as u128 <= cap,
        }
    }
}

/// `Q = Q0 + Q1`, with `Q0` summed over the selected blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSplit {
    pub q0: f64,
    pub q1: f64,
    pub m1: u32,
    pub mode: SelectionMode,
    pub selected_j: Vec<u64>,
}

fn split_from_blocks(
    dec: &SubintervalDecomposition,
    m1: u32,
    mode: SelectionMode,
    cot: impl Fn(u64) -> f64,
) -> QSplit {
    let (r_eff, qv) = (dec.r_eff, dec.q.get());
    let mut acc0 = CompensatedSum::new();
    let mut acc1 = CompensatedSum::new();
    let mut selected_j = Vec::new();
    for (j, row) in dec.rows.iter().enumerate() {
        let take = mode.admits(row.s, r_eff, qv, m1) || mode.admits(row.t, r_eff, qv, m1);
        if take {
            selected_j.push(j as u64);
        }
        let acc = if take { &mut acc0 } else { &mut acc1 };
        for k in dec.block_numerators(j) {
            acc.add(j as f64 * cot(k));
        }
    }
    QSplit {
        q0: acc0.value(),
        q1: acc1.value(),
        m1,
        mode,
        selected_j,
    }
}

fn check_threshold(m1: u32, q: &PrimeModulus) -> Result<()> {
    if m1 >= 63 || (1u64 << m1) >= q.get() {
        return Err(Error::ThresholdTooLarge { m1, q: q.get() });
    }
    Ok(())
}

/// Splits `Q(r_eff/q)` into `Q0` (blocks passing the threshold test for
/// `θ = ±1`) and `Q1` (the rest). Both parts are summed term by term over
/// disjoint block sets in ascending `m`.
pub fn q_split(r_eff: u64, q: &PrimeModulus, m1: u32, mode: SelectionMode) -> Result<QSplit> {
    check_threshold(m1, q)?;
    let dec = decompose(r_eff, q)?;
    let qv = q.get();
    Ok(split_from_blocks(&dec, m1, mode, |k| cot_pi_frac(k, qv)))
}

/// As [`q_split`], reusing a prebuilt table and decomposition.
pub fn q_split_with(
    dec: &SubintervalDecomposition,
    table: &CotTable,
    m1: u32,
    mode: SelectionMode,
) -> Result<QSplit> {
    check_threshold(m1, &dec.q)?;
    if table.denominator() != dec.q.get() {
        return Err(Error::InvalidArgument(
            "table denominator does not match q".into(),
        ));
    }
    Ok(split_from_blocks(dec, m1, mode, |k| table.get(k)))
}

/// The `g`-based approximant `(r q / π)·g(q*/(r+a); 2^m1)` of `Q0((r+a)/q)`,
/// where `q·q* ≡ 1 (mod r + a)`.
pub fn q_approx(r: u64, q: &PrimeModulus, m1: u32, a: u64) -> Result<f64> {
    if m1 >= 63 {
        return Err(Error::ThresholdTooLarge { m1, q: q.get() });
    }
    let modulus = r + a;
    let qs = q_star(q, r, a)?;
    let alpha = qs as f64 / modulus as f64;
    Ok(r as f64 * q.get() as f64 / PI * g_trunc(alpha, 1u64 << m1))
}
