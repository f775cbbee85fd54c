//! Integer and modular arithmetic primitives.
//!
//! All modular products go through 128-bit intermediates, so every routine is
//! exact for moduli up to `2^63`. Modular inverses are returned as the least
//! positive residue; [`signed_representative`] recovers the balanced form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extended Euclid: returns `(g, x, y)` with `g = gcd(a, b) ≥ 0` and `a·x + b·y = g`.
///
/// `ext_gcd(0, 0)` returns `(0, 0, 0)`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
        (old_t, t) = (t, old_t - quot * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Least positive residue `x` with `a·x ≡ 1 (mod m)`.
pub fn mod_inverse(a: u64, m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "modulus must be at least 2, got {m}"
        )));
    }
    let (g, x, _) = ext_gcd((a % m) as i128, m as i128);
    if g != 1 {
        return Err(Error::NotCoprime {
            a,
            m,
            gcd: g as u64,
        });
    }
    Ok(x.rem_euclid(m as i128) as u64)
}

/// Balanced representative of `x mod m` in `(−m/2, m/2]`.
pub fn signed_representative(x: u64, m: u64) -> i64 {
    let x = x % m;
    if 2 * (x as u128) > m as u128 {
        x as i64 - m as i64
    } else {
        x as i64
    }
}

/// Inverses of every element of `values` modulo `m`, using one modular
/// inversion for the whole batch (prefix products, then a backward sweep).
pub fn batch_inverse(values: &[u64], m: u64) -> Result<Vec<u64>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = 1u64;
    for &v in values {
        let v = v % m;
        if v == 0 {
            return Err(Error::NotCoprime { a: 0, m, gcd: m });
        }
        acc = mul_mod(acc, v, m);
        prefix.push(acc);
    }
    let mut inv_acc = mod_inverse(acc, m)?;
    let mut out = vec![0u64; values.len()];
    for i in (0..values.len()).rev() {
        let before = if i == 0 { 1 } else { prefix[i - 1] };
        out[i] = mul_mod(inv_acc, before, m);
        inv_acc = mul_mod(inv_acc, values[i] % m, m);
    }
    Ok(out)
}

/// Table `inv[x]` of inverses modulo the prime `q` for `x = 1 … q−1` (`inv[0] = 0`).
pub fn inverse_table(q: &PrimeModulus) -> Vec<u64> {
    let residues: Vec<u64> = (1..q.get()).collect();
    let mut inv = Vec::with_capacity(q.get() as usize);
    inv.push(0);
    inv.extend(batch_inverse(&residues, q.get()).expect("nonzero residues mod a prime are units"));
    inv
}

/// `q*` with `q·q* ≡ 1 (mod r + a)`, least positive residue.
pub fn q_star(q: &PrimeModulus, r: u64, a: u64) -> Result<u64> {
    let modulus = r
        .checked_add(a)
        .ok_or_else(|| Error::Overflow(format!("r + a overflows: {r} + {a}")))?;
    if modulus < 2 {
        return Err(Error::InvalidArgument(format!(
            "r + a must be at least 2, got {modulus}"
        )));
    }
    mod_inverse(q.get() % modulus, modulus).map_err(|e| match e {
        Error::NotCoprime { gcd, .. } => Error::NotCoprime {
            a: q.get(),
            m: modulus,
            gcd,
        },
        other => other,
    })
}

// Witnesses 2..37 decide primality for every n < 3.3·10^24.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller–Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes; `flags[n]` is true iff `n` is prime, for `n ≤ limit`.
pub fn prime_flags(limit: usize) -> Vec<bool> {
    let mut flags = vec![true; limit + 1];
    flags[0] = false;
    if limit >= 1 {
        flags[1] = false;
    }
    let mut p = 2;
    while p * p <= limit {
        if flags[p] {
            let mut m = p * p;
            while m <= limit {
                flags[m] = false;
                m += p;
            }
        }
        p += 1;
    }
    flags
}

/// All primes `≤ limit`, ascending.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    prime_flags(limit as usize)
        .iter()
        .enumerate()
        .filter_map(|(n, &p)| p.then_some(n as u64))
        .collect()
}

/// A modulus that has passed the deterministic primality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(q: u64) -> Result<Self> {
        if is_prime(q) {
            Ok(Self(q))
        } else {
            Err(Error::NotPrime(q))
        }
    }

    #[inline]
    pub fn get(&self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for PrimeModulus {
    type Error = Error;
    fn try_from(q: u64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<PrimeModulus> for u64 {
    fn from(q: PrimeModulus) -> u64 {
        q.0
    }
}

impl std::fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Distinct non-negative numerator shifts `a_1, …, a_L`, kept in the order given
/// so that per-shift parameters (exponents, test functions) stay aligned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSet(Vec<u64>);

impl ShiftSet {
    pub fn new(shifts: Vec<u64>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidShifts(
                "at least one shift is required".into(),
            ));
        }
        let mut sorted = shifts.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidShifts(format!(
                "shifts must be distinct: {shifts:?}"
            )));
        }
        Ok(Self(shifts))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Numerator window `[A0·q, A1·q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a0: f64,
    pub a1: f64,
}

impl Window {
    /// Strict form `1/2 < A0 < A1 < 1`.
    pub fn new(a0: f64, a1: f64) -> Result<Self> {
        if !(a0.is_finite() && a1.is_finite()) {
            return Err(Error::InvalidWindow {
                a0,
                a1,
                reason: "bounds must be finite",
            });
        }
        if !(0.5 < a0 && a0 < a1 && a1 < 1.0) {
            return Err(Error::InvalidWindow {
                a0,
                a1,
                reason: "need 1/2 < A0 < A1 < 1",
            });
        }
        Ok(Self { a0, a1 })
    }

    /// Extended form `0 < A0 < A1 ≤ 1`.
    pub fn relaxed(a0: f64, a1: f64) -> Result<Self> {
        if !(a0.is_finite() && a1.is_finite()) {
            return Err(Error::InvalidWindow {
                a0,
                a1,
                reason: "bounds must be finite",
            });
        }
        if !(0.0 < a0 && a0 < a1 && a1 <= 1.0) {
            return Err(Error::InvalidWindow {
                a0,
                a1,
                reason: "need 0 < A0 < A1 <= 1",
            });
        }
        Ok(Self { a0, a1 })
    }

    pub fn width(&self) -> f64 {
        self.a1 - self.a0
    }

    /// Integer bounds `(⌈A0·q⌉, ⌊A1·q⌋)`; may be an empty range.
    ///
    /// Products within a few ulps of an integer count as that integer, so
    /// decimal bounds such as `0.55·100` are not lost to binary rounding.
    pub fn bounds(&self, q: u64) -> (u64, u64) {
        let snap = |x: f64| {
            let n = x.round();
            if (x - n).abs() <= 8.0 * f64::EPSILON * x.abs().max(1.0) {
                n
            } else {
                x
            }
        };
        let lo = snap(self.a0 * q as f64).ceil().max(0.0) as u64;
        let hi = snap(self.a1 * q as f64).floor().max(0.0) as u64;
        (lo, hi)
    }
}

impl Default for Window {
    fn default() -> Self {
        Self { a0: 0.55, a1: 0.95 }
    }
}

/// Integers `r` with `A0·q ≤ r ≤ A1·q`, ascending, optionally restricted to primes.
///
/// Errors with [`Error::EmptyWindow`] when no integer (or no prime, in the
/// filtered case) lies in the range.
pub fn residues_in_window(q: u64, w: &Window, primes_only: bool) -> Result<Vec<u64>> {
    let (lo, hi) = w.bounds(q);
    let empty = || Error::EmptyWindow {
        q,
        a0: w.a0,
        a1: w.a1,
    };
    if lo > hi {
        return Err(empty());
    }
    let out: Vec<u64> = if primes_only {
        (lo..=hi).filter(|&r| is_prime(r)).collect()
    } else {
        (lo..=hi).collect()
    };
    if out.is_empty() {
        return Err(empty());
    }
    Ok(out)
}
