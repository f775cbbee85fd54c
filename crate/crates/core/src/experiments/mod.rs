//! Runnable statistical experiments over a numerator window `[A0 q, A1 q]`:
//! equidistribution counts for `q*(r; l)/r`, joint moments of normalized `Q`
//! and `c0` values at shifted numerators, distributional comparisons against
//! the `g`-sample, and the empirical constants of the `Q0`/`Q1` split.

pub mod config;
pub mod report;

use std::f64::consts::PI;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cotangent::{decompose, q_approx, q_split_with, CotTable, SelectionMode};
use crate::error::{Error, Result};
use crate::gfunction::{
    g_sample, ks_distance, moment_exact, EmpiricalCdf, MAX_CAP, SECOND_MOMENT_LIMIT,
};
use crate::numthy::{q_star, residues_in_window, PrimeModulus, ShiftSet, Window};
use crate::summation::CompensatedSum;
use crate::zeta::{residual, CoprimePair, QuadratureSpec, ZetaTable};

pub use report::{ExperimentReport, StatRecord};

/// Above this modulus the numerator sweep is subsampled.
pub const SUBSAMPLE_THRESHOLD: u64 = 200_000;

/// Default number of sampled numerators above [`SUBSAMPLE_THRESHOLD`].
pub const DEFAULT_SAMPLE_LIMIT: usize = 20_000;

/// Largest modulus any experiment accepts.
pub const MAX_MODULUS: u64 = 1 << 40;

/// Default prime ladder for convergence tables.
pub const DEFAULT_LADDER: [u64; 4] = [1009, 10_007, 30_011, 100_003];

/// Default number of `g`-sample points.
pub const DEFAULT_G_SAMPLES: usize = 100_000;

/// Which numerators in the window are averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumeratorMode {
    #[default]
    AllResidues,
    PrimesOnly,
}

impl FromStr for NumeratorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-residues" => Ok(Self::AllResidues),
            "primes" | "primes-only" => Ok(Self::PrimesOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown numerator mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for NumeratorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AllResidues => "all-residues",
            Self::PrimesOnly => "primes-only",
        })
    }
}

/// Outer normalization of an empirical average.
///
/// `Count` divides by the number of summands. `Theorem` uses `1/φ(q)` (or
/// `log q / q` over primes) times `(A1−A0)^{−L}`; `Lemma` the same with
/// `(A1−A0)^{−(k_1+⋯+k_L)}`. The normalized values `scale·c0/q` are used in all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Count,
    Theorem,
    Lemma,
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Self::Count),
            "theorem" => Ok(Self::Theorem),
            "lemma" => Ok(Self::Lemma),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Count => "count",
            Self::Theorem => "theorem",
            Self::Lemma => "lemma",
        })
    }
}

/// Numerators to average over and how they were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub seed: u64,
    /// Sample size used when `q` exceeds [`SUBSAMPLE_THRESHOLD`].
    pub sample_limit: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_limit: DEFAULT_SAMPLE_LIMIT,
        }
    }
}

#[derive(Debug, Clone)]
struct Numerators {
    values: Vec<u64>,
    /// Size of the full admissible set before subsampling.
    population: usize,
}

fn check_domain(q: u64, w: &Window, shifts: &ShiftSet) -> Result<()> {
    if q > MAX_MODULUS {
        return Err(Error::Overflow(format!(
            "q = {q} exceeds the experiment limit 2^40"
        )));
    }
    if q <= shifts.max() + 2 {
        return Err(Error::InvalidArgument(format!(
            "q = {q} must exceed the largest shift plus 2"
        )));
    }
    let (_, hi) = w.bounds(q);
    if hi + shifts.max() >= q {
        return Err(Error::InvalidWindow {
            a0: w.a0,
            a1: w.a1,
            reason: "shifted numerators r + a must stay below q",
        });
    }
    Ok(())
}

fn numerators(q: u64, w: &Window, mode: NumeratorMode, sampling: &Sampling) -> Result<Numerators> {
    let all = residues_in_window(q, w, mode == NumeratorMode::PrimesOnly)?;
    let population = all.len();
    if q <= SUBSAMPLE_THRESHOLD || population <= sampling.sample_limit {
        return Ok(Numerators {
            values: all,
            population,
        });
    }
    if sampling.sample_limit == 0 {
        return Err(Error::InvalidArgument(
            "sample_limit must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut idx = sample(&mut rng, population, sampling.sample_limit).into_vec();
    idx.sort_unstable();
    Ok(Numerators {
        values: idx.into_iter().map(|i| all[i]).collect(),
        population,
    })
}

/// `f(r + a_l)` for each shift (outer) and numerator (inner), evaluating each
/// distinct argument once.
fn shifted_values(
    numerators: &[u64],
    shifts: &ShiftSet,
    f: impl Fn(u64) -> f64 + Sync,
) -> Vec<Vec<f64>> {
    let mut args: Vec<u64> = shifts
        .as_slice()
        .iter()
        .flat_map(|&a| numerators.iter().map(move |&r| r + a))
        .collect();
    args.sort_unstable();
    args.dedup();
    let vals: Vec<f64> = args.par_iter().with_min_len(16).map(|&n| f(n)).collect();
    let lookup = |n: u64| vals[args.binary_search(&n).expect("argument was tabulated")];
    shifts
        .as_slice()
        .iter()
        .map(|&a| numerators.iter().map(|&r| lookup(r + a)).collect())
        .collect()
}

/// Closed box `[α_l, α_l + δ]` in `(0, 1)^L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub alphas: Vec<f64>,
    pub delta: f64,
}

impl BoxSpec {
    pub fn new(alphas: Vec<f64>, delta: f64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidArgument(
                "box needs at least one coordinate".into(),
            ));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive, got {delta}"
            )));
        }
        for &a in &alphas {
            if !(0.0..1.0).contains(&a) || a + delta >= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "need 0 <= alpha and alpha + delta < 1, got alpha = {a}"
                )));
            }
        }
        Ok(Self { alphas, delta })
    }
}

/// `q*(r; a)/r` reduced mod 1, as the exact fraction `(q* mod r, r)`.
fn inverse_ratio(q: &PrimeModulus, r: u64, a: u64) -> Result<(u64, u64)> {
    Ok((q_star(q, r, a)? % r, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub count: u64,
    /// `δ^L (A1 − A0) q`.
    pub target: f64,
    pub window_size: u64,
}

/// Number of `r` in the window with `α_l ≤ {q*(r; l)/r} ≤ α_l + δ` for every `l`.
pub fn count_inverse_box(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    bx: &BoxSpec,
) -> Result<BoxCount> {
    check_domain(q.get(), w, shifts)?;
    if bx.alphas.len() != shifts.len() {
        return Err(Error::InvalidArgument(format!(
            "box has {} coordinates but there are {} shifts",
            bx.alphas.len(),
            shifts.len()
        )));
    }
    let rs = residues_in_window(q.get(), w, false)?;
    let hits = rs
        .par_iter()
        .map(|&r| -> Result<u64> {
            for (&a, &alpha) in shifts.as_slice().iter().zip(&bx.alphas) {
                let (num, den) = inverse_ratio(&q, r, a)?;
                let x = num as f64 / den as f64;
                if x < alpha || x > alpha + bx.delta {
                    return Ok(0);
                }
            }
            Ok(1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoxCount {
        count: hits.iter().sum(),
        target: bx.delta.powi(shifts.len() as i32) * w.width() * q.get() as f64,
        window_size: rs.len() as u64,
    })
}

/// Counts over the `cells^L` half-open boxes `∏ [i_l/cells, (i_l+1)/cells)`,
/// in row-major order (first shift slowest). Cell indices are computed in
/// exact integer arithmetic, so the counts sum to the window size.
pub fn box_partition_counts(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    cells: u32,
) -> Result<Vec<u64>> {
    check_domain(q.get(), w, shifts)?;
    if cells == 0 {
        return Err(Error::InvalidArgument("cells must be positive".into()));
    }
    let total = (cells as u64)
        .checked_pow(shifts.len() as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::Overflow(format!("{cells}^{} cells", shifts.len())))?;
    let mut counts = vec![0u64; total as usize];
    for r in residues_in_window(q.get(), w, false)? {
        let mut idx = 0u64;
        for &a in shifts.as_slice() {
            let (num, den) = inverse_ratio(&q, r, a)?;
            idx = idx * cells as u64 + (num as u128 * cells as u128 / den as u128) as u64;
        }
        counts[idx as usize] += 1;
    }
    Ok(counts)
}

/// Exponents, cap and normalization of a joint-moment experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub k: Vec<u32>,
    pub cap_exponent: u32,
    pub scale: f64,
    pub mode: NumeratorMode,
    pub normalization: Normalization,
    pub sampling: Sampling,
}

impl MomentSpec {
    pub fn new(k: Vec<u32>, cap_exponent: u32) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::InvalidArgument(
                "moment exponents must not be empty".into(),
            ));
        }
        if cap_exponent == 0 || (1u64 << cap_exponent.min(63)) > MAX_CAP {
            return Err(Error::CapTooLarge {
                cap: 1u64 << cap_exponent.min(63),
                max: MAX_CAP,
            });
        }
        Ok(Self {
            k,
            cap_exponent,
            scale: PI,
            mode: NumeratorMode::AllResidues,
            normalization: Normalization::Count,
            sampling: Sampling::default(),
        })
    }

    pub fn cap(&self) -> u64 {
        1 << self.cap_exponent
    }
}

/// Outer factor turning `Σ_r ∏ x^{k}` over the used numerators into the statistic.
fn prefactor(
    q: u64,
    w: &Window,
    nums: &Numerators,
    norm: Normalization,
    mode: NumeratorMode,
    degree: u32,
    l: usize,
) -> f64 {
    let used = nums.values.len() as f64;
    let extrapolate = nums.population as f64 / used;
    let base = match mode {
        NumeratorMode::AllResidues => 1.0 / (q - 1) as f64,
        NumeratorMode::PrimesOnly => (q as f64).ln() / q as f64,
    };
    match norm {
        Normalization::Count => 1.0 / used,
        Normalization::Theorem => extrapolate * base / w.width().powi(l as i32),
        Normalization::Lemma => extrapolate * base / w.width().powi(degree as i32),
    }
}

/// Product of `∫ g(·; cap)^{k_l}`.
fn moment_target(cap: u64, k: &[u32]) -> Result<f64> {
    k.iter()
        .try_fold(1.0, |acc, &kl| Ok(acc * moment_exact(cap, kl)?))
}

fn joint_moment_report(
    kind: &str,
    q: u64,
    w: &Window,
    shifts: &ShiftSet,
    spec: &MomentSpec,
    nums: &Numerators,
    values: &[Vec<f64>],
    started: Instant,
) -> Result<ExperimentReport> {
    if spec.k.len() != shifts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} exponents for {} shifts",
            spec.k.len(),
            shifts.len()
        )));
    }
    let degree: u32 = spec.k.iter().sum();
    let mut acc = CompensatedSum::new();
    for i in 0..nums.values.len() {
        let mut p = 1.0;
        for (l, &kl) in spec.k.iter().enumerate() {
            p *= values[l][i].powi(kl as i32);
        }
        acc.add(p);
    }
    let stat = acc.value()
        * prefactor(
            q,
            w,
            nums,
            spec.normalization,
            spec.mode,
            degree,
            shifts.len(),
        );
    let target = moment_target(spec.cap(), &spec.k)?;
    let n = nums.values.len();
    let mut report =
        ExperimentReport::new(kind, q, *w, shifts.as_slice().to_vec(), spec.sampling.seed);
    report.config.insert("moments.k".into(), join(&spec.k));
    report
        .config
        .insert("cap_exponent".into(), spec.cap_exponent.to_string());
    report
        .config
        .insert("scale".into(), crate::format::sig17(spec.scale));
    report.config.insert("mode".into(), spec.mode.to_string());
    report
        .config
        .insert("normalization".into(), spec.normalization.to_string());
    report.config.insert(
        "sample_limit".into(),
        spec.sampling.sample_limit.to_string(),
    );
    report
        .config
        .insert("population".into(), nums.population.to_string());
    report.n = n;
    report.push("moment", stat, target);
    if degree % 2 == 1 {
        report.push("moment_negated_scale", -stat, target);
    }
    if spec.k.len() == 1 && spec.k[0] == 2 {
        report.push("moment_vs_limit", stat, SECOND_MOMENT_LIMIT);
    }
    for e in 1..=MAX_CAP.trailing_zeros() {
        report.push(
            &format!("moment_vs_cap_{}", 1u64 << e),
            stat,
            moment_target(1 << e, &spec.k)?,
        );
    }
    report.finish(started);
    Ok(report)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Average over the window of `∏_l (scale·Q((r+a_l)/q)/((r+a_l) q))^{k_l}`.
pub fn joint_q_moments(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    spec: &MomentSpec,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    check_domain(q.get(), w, shifts)?;
    let nums = numerators(q.get(), w, spec.mode, &spec.sampling)?;
    let table = CotTable::new(q.get())?;
    let qf = q.get() as f64;
    let values = shifted_values(&nums.values, shifts, |n| {
        spec.scale * table.q_sum(n) / (n as f64 * qf)
    });
    joint_moment_report(
        "q-moments",
        q.get(),
        w,
        shifts,
        spec,
        &nums,
        &values,
        started,
    )
}

/// Normalized values `scale·c0((r+a_l)/q)/q`, per shift, over the admissible numerators.
pub fn scaled_c0_values(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    scale: f64,
    mode: NumeratorMode,
    sampling: &Sampling,
) -> Result<(Vec<u64>, usize, Vec<Vec<f64>>)> {
    check_domain(q.get(), w, shifts)?;
    let nums = numerators(q.get(), w, mode, sampling)?;
    let table = CotTable::new(q.get())?;
    let qf = q.get() as f64;
    let values = shifted_values(&nums.values, shifts, |n| scale * table.c0(n) / qf);
    Ok((nums.values, nums.population, values))
}

/// Average over the window of `∏_l (scale·c0((r+a_l)/q)/q)^{k_l}`.
pub fn joint_c0_moments(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    spec: &MomentSpec,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    let (values_r, population, values) =
        scaled_c0_values(q, w, shifts, spec.scale, spec.mode, &spec.sampling)?;
    let nums = Numerators {
        values: values_r,
        population,
    };
    joint_moment_report(
        "c0-moments",
        q.get(),
        w,
        shifts,
        spec,
        &nums,
        &values,
        started,
    )
}

/// Bounded continuous test functions vanishing at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `exp(−((x − center)/width)²)`.
    Gaussian { center: f64, width: f64 },
    /// `p(x)·max(0, 1 − (x/clip)²)` with `p` given by ascending coefficients.
    ClippedPolynomial { coeffs: Vec<f64>, clip: f64 },
    /// The constant function; does not vanish at infinity and serves as a sanity case.
    Constant { value: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { center, width } => (-((x - center) / width).powi(2)).exp(),
            Self::ClippedPolynomial { coeffs, clip } => {
                let envelope = (1.0 - (x / clip).powi(2)).max(0.0);
                if envelope == 0.0 {
                    return 0.0;
                }
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c) * envelope
            }
            Self::Constant { value } => *value,
        }
    }

    /// Largest `|f|` on the real line, up to the sampling of the clipped polynomial.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Gaussian { .. } => 1.0,
            Self::Constant { value } => value.abs(),
            Self::ClippedPolynomial { clip, .. } => (0..=2000)
                .map(|i| self.eval(-clip + 2.0 * clip * i as f64 / 2000.0).abs())
                .fold(0.0, f64::max),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `gaussian[:center[:width]]`, `const:<value>`, `poly:<c0>,<c1>,…[:clip]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse test function `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let mut parts = s.trim().split(':');
        match parts.next().map(str::trim) {
            Some("gaussian") => {
                let center = parts.next().map(num).transpose()?.unwrap_or(0.0);
                let width = parts.next().map(num).transpose()?.unwrap_or(1.0);
                if !(width > 0.0) || parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Self::Gaussian { center, width })
            }
            Some("const") => {
                let value = num(parts.next().ok_or_else(bad)?)?;
                Ok(Self::Constant { value })
            }
            Some("poly") => {
                let coeffs = parts
                    .next()
                    .ok_or_else(bad)?
                    .split(',')
                    .map(num)
                    .collect::<Result<Vec<_>>>()?;
                let clip = parts.next().map(num).transpose()?.unwrap_or(3.0);
                if !(clip > 0.0) || parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Self::ClippedPolynomial { coeffs, clip })
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian { center, width } => write!(f, "gaussian:{center}:{width}"),
            Self::Constant { value } => write!(f, "const:{value}"),
            Self::ClippedPolynomial { coeffs, clip } => write!(f, "poly:{}:{clip}", join(coeffs)),
        }
    }
}

/// The built-in Gaussian bumps `gaussian:c:w` used for independence checks.
pub fn gaussian_bumps() -> Vec<TestFunction> {
    [(0.0, 1.0), (0.5, 0.5), (-0.5, 0.5), (1.0, 1.0), (0.0, 0.3)]
        .into_iter()
        .map(|(center, width)| TestFunction::Gaussian { center, width })
        .collect()
}

/// Settings of a distributional comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub cap_exponent: u32,
    pub scale: f64,
    pub mode: NumeratorMode,
    pub g_samples: usize,
    pub sampling: Sampling,
}

impl Default for DistributionSpec {
    fn default() -> Self {
        Self {
            cap_exponent: 12,
            scale: PI,
            mode: NumeratorMode::AllResidues,
            g_samples: DEFAULT_G_SAMPLES,
            sampling: Sampling::default(),
        }
    }
}

/// Report plus the per-shift samples behind the marginal CDFs.
#[derive(Debug, Clone)]
pub struct DistributionOutcome {
    pub report: ExperimentReport,
    pub marginals: Vec<Vec<f64>>,
    pub g_sample: Vec<f64>,
}

/// Empirical `∏ f_l(scale·c0((r+a_l)/q)/q)` against `∏ ∫ f_l dμ_cap`, the gap
/// between the joint average and the product of marginal averages, and the
/// KS distance of each marginal to the `g(·; cap)` sample.
pub fn theorem11_check(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    functions: &[TestFunction],
    spec: &DistributionSpec,
) -> Result<DistributionOutcome> {
    let started = Instant::now();
    if functions.len() != shifts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} test functions for {} shifts",
            functions.len(),
            shifts.len()
        )));
    }
    let cap = 1u64 << spec.cap_exponent.min(63);
    if spec.cap_exponent == 0 || cap > MAX_CAP {
        return Err(Error::CapTooLarge { cap, max: MAX_CAP });
    }
    if spec.g_samples == 0 {
        return Err(Error::EmptySample);
    }
    let (_, population, values) =
        scaled_c0_values(q, w, shifts, spec.scale, spec.mode, &spec.sampling)?;
    let n = values[0].len();
    let reference = g_sample(cap, spec.g_samples);
    let reference_cdf = EmpiricalCdf::new(reference.clone())?;

    let mut report = ExperimentReport::new(
        "theorem11",
        q.get(),
        *w,
        shifts.as_slice().to_vec(),
        spec.sampling.seed,
    );
    report.config.insert("functions".into(), join(functions));
    report
        .config
        .insert("cap_exponent".into(), spec.cap_exponent.to_string());
    report
        .config
        .insert("scale".into(), crate::format::sig17(spec.scale));
    report.config.insert("mode".into(), spec.mode.to_string());
    report
        .config
        .insert("g_samples".into(), spec.g_samples.to_string());
    report.config.insert(
        "sample_limit".into(),
        spec.sampling.sample_limit.to_string(),
    );
    report
        .config
        .insert("population".into(), population.to_string());
    report.n = n;

    let mut joint = CompensatedSum::new();
    for i in 0..n {
        joint.add(
            functions
                .iter()
                .zip(&values)
                .map(|(f, v)| f.eval(v[i]))
                .product(),
        );
    }
    let joint = joint.value() / n as f64;
    let mut marginal_product = 1.0;
    let mut target_product = 1.0;
    let mut ks_rows = Vec::with_capacity(functions.len());
    for (l, (f, v)) in functions.iter().zip(&values).enumerate() {
        let marginal = v.iter().map(|&x| f.eval(x)).sum::<CompensatedSum>().value() / n as f64;
        let target = reference
            .iter()
            .map(|&x| f.eval(x))
            .sum::<CompensatedSum>()
            .value()
            / reference.len() as f64;
        marginal_product *= marginal;
        target_product *= target;
        report.push(&format!("marginal_{l}"), marginal, target);
        ks_rows.push(ks_distance(&EmpiricalCdf::new(v.clone())?, &reference_cdf));
    }
    report.push("joint", joint, target_product);
    report.push("independence_gap", (joint - marginal_product).abs(), 0.0);
    for (l, ks) in ks_rows.into_iter().enumerate() {
        report.push(&format!("ks_{l}"), ks, 0.0);
    }
    report.finish(started);
    Ok(DistributionOutcome {
        report,
        marginals: values,
        g_sample: reference,
    })
}

/// KS distance between `scale·c0(r/q)/q` over the window and the `g(·; cap)`
/// sample, for each scale in `scales`.
pub fn calibrate_scale(
    q: PrimeModulus,
    w: &Window,
    scales: &[f64],
    spec: &DistributionSpec,
) -> Result<Vec<(f64, f64)>> {
    let shifts = ShiftSet::new(vec![0])?;
    let (_, _, values) = scaled_c0_values(q, w, &shifts, 1.0, spec.mode, &spec.sampling)?;
    let cap = 1u64 << spec.cap_exponent.min(63);
    if spec.cap_exponent == 0 || cap > MAX_CAP {
        return Err(Error::CapTooLarge { cap, max: MAX_CAP });
    }
    let reference = EmpiricalCdf::new(g_sample(cap, spec.g_samples))?;
    scales
        .iter()
        .map(|&s| {
            let scaled = EmpiricalCdf::new(values[0].iter().map(|&x| s * x).collect())?;
            Ok((s, ks_distance(&scaled, &reference)))
        })
        .collect()
}

/// Largest normalized split errors at one threshold exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConstantRow {
    pub m1: u32,
    pub mode: SelectionMode,
    /// `max |Q1|·2^{m1}/q²`.
    pub q1_constant: f64,
    /// `max |Q0 − (r q/π) g(q*/(r+a); 2^{m1})| / (q 2^{m1})`.
    pub q0_constant: f64,
    pub samples: usize,
}

/// Samples `per_q` numerators from the window for each `q` and records, for
/// each `m1`, the largest normalized `Q1` and `Q0` approximation errors over
/// all samples and shifts. Moduli with `2^{m1} ≥ q` are skipped for that `m1`.
pub fn split_constants(
    q_list: &[PrimeModulus],
    w: &Window,
    shifts: &ShiftSet,
    m1s: &[u32],
    per_q: usize,
    mode: SelectionMode,
    seed: u64,
) -> Result<Vec<SplitConstantRow>> {
    let per_q_rows = q_list
        .par_iter()
        .map(|&q| -> Result<Vec<(f64, f64, usize)>> {
            let qv = q.get();
            let (lo, hi) = w.bounds(qv);
            if hi < lo || hi + shifts.max() >= qv {
                return Ok(vec![(0.0, 0.0, 0); m1s.len()]);
            }
            let table = CotTable::new(qv)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(qv);
            let span = (hi - lo + 1) as usize;
            let picks: Vec<u64> = sample(&mut rng, span, per_q.min(span))
                .into_iter()
                .map(|i| lo + i as u64)
                .collect();
            let mut out = vec![(0.0f64, 0.0f64, 0usize); m1s.len()];
            let qf = qv as f64;
            for &r in &picks {
                for &a in shifts.as_slice() {
                    let dec = decompose(r + a, &q)?;
                    for (slot, &m1) in out.iter_mut().zip(m1s) {
                        if m1 >= 63 || (1u64 << m1) >= qv {
                            continue;
                        }
                        let split = q_split_with(&dec, &table, m1, mode)?;
                        let cap = (1u64 << m1) as f64;
                        let approx = q_approx(r, &q, m1, a)?;
                        slot.0 = slot.0.max(split.q1.abs() * cap / (qf * qf));
                        slot.1 = slot.1.max((split.q0 - approx).abs() / (qf * cap));
                        slot.2 += 1;
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(m1s
        .iter()
        .enumerate()
        .map(|(i, &m1)| {
            let (mut q1c, mut q0c, mut samples) = (0.0f64, 0.0f64, 0usize);
            for rows in &per_q_rows {
                q1c = q1c.max(rows[i].0);
                q0c = q0c.max(rows[i].1);
                samples += rows[i].2;
            }
            SplitConstantRow {
                m1,
                mode,
                q1_constant: q1c,
                q0_constant: q0c,
                samples,
            }
        })
        .collect())
}

/// Both sides of the zeta identity for each pair at height `t_max`, with the
/// quadrature uncertainty of each pair echoed as `uncertainty.r/b`.
pub fn identity_report(pairs: &[CoprimePair], t_max: f64, step: f64) -> Result<ExperimentReport> {
    let started = Instant::now();
    let spec = QuadratureSpec::new(t_max, step)?;
    let table = ZetaTable::new(spec.t_max + 1.0, step)?;
    let mut report = ExperimentReport::new("identity", 0, Window::default(), Vec::new(), 0);
    report
        .config
        .insert("T".into(), crate::format::sig17(spec.t_max));
    report
        .config
        .insert("step".into(), crate::format::sig17(step));
    report.config.insert(
        "pairs".into(),
        pairs
            .iter()
            .map(|p| format!("{}/{}", p.r, p.b))
            .collect::<Vec<_>>()
            .join(","),
    );
    report.n = table.len();
    for &pair in pairs {
        let res = residual(pair, &table, &spec)?;
        report.config.insert(
            format!("uncertainty.{}/{}", pair.r, pair.b),
            crate::format::sig17(res.uncertainty),
        );
        report.push(&format!("identity_{}_{}", pair.r, pair.b), res.lhs, res.rhs);
    }
    report.finish(started);
    Ok(report)
}
