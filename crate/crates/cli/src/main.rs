use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use cotlab::cotangent::{self, FareyFraction, SelectionMode};
use cotlab::experiments::config::{inverse_box_report, run_config};
use cotlab::experiments::report::{config_hash, write_csv, write_json};
use cotlab::experiments::{
    calibrate_scale, identity_report, joint_c0_moments, joint_q_moments, theorem11_check, BoxSpec,
    DistributionSpec, ExperimentReport, MomentSpec, Normalization, NumeratorMode, Sampling,
    TestFunction,
};
use cotlab::expsums::{self, RationalExponentArg};
use cotlab::format::{sig17, sig6};
use cotlab::gfunction::{g_trunc, moment_exact, second_moment_gcd_oracle, SECOND_MOMENT_LIMIT};
use cotlab::numthy::{primes_up_to, PrimeModulus, ShiftSet, Window};
use cotlab::zeta::CoprimePair;
use cotlab::Error;

#[derive(Parser, Debug)]
#[command(
    name = "cotlab",
    version,
    about = "Shifted cotangent sums, their moments and the zeta identity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "COTLAB_THREADS")]
    threads: Option<usize>,

    /// Report zero runtimes so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,

    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct WindowArgs {
    /// Lower window bound A0.
    #[arg(long, default_value_t = 0.55)]
    a0: f64,
    /// Upper window bound A1.
    #[arg(long, default_value_t = 0.95)]
    a1: f64,
}

impl WindowArgs {
    fn window(&self) -> cotlab::Result<Window> {
        Window::relaxed(self.a0, self.a1)
    }
}

#[derive(Args, Debug, Clone)]
struct SamplingArgs {
    /// Seed for subsampling large moduli.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Numerators sampled when q exceeds the subsampling threshold.
    #[arg(long, default_value_t = cotlab::experiments::DEFAULT_SAMPLE_LIMIT)]
    sample_limit: usize,
}

impl SamplingArgs {
    fn sampling(&self) -> Sampling {
        Sampling {
            seed: self.seed,
            sample_limit: self.sample_limit,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    All,
    Primes,
}

impl From<Mode> for NumeratorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::All => NumeratorMode::AllResidues,
            Mode::Primes => NumeratorMode::PrimesOnly,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Selection {
    Scaled,
    Unscaled,
}

impl From<Selection> for SelectionMode {
    fn from(s: Selection) -> Self {
        match s {
            Selection::Scaled => SelectionMode::Scaled,
            Selection::Unscaled => SelectionMode::Unscaled,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Norm {
    Count,
    Theorem,
    Lemma,
}

impl From<Norm> for Normalization {
    fn from(n: Norm) -> Self {
        match n {
            Norm::Count => Normalization::Count,
            Norm::Theorem => Normalization::Theorem,
            Norm::Lemma => Normalization::Lemma,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MomentOf {
    C0,
    Q,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BoundKind {
    Mixed,
    Kloosterman,
    Primes,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cotangent sum c0(r/b).
    C0 {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        b: u64,
    },
    /// Vasyunin sum V(r/b).
    Vasyunin {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        b: u64,
    },
    /// Q(r/q) for prime q.
    Qsum {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        q: u64,
    },
    /// Block decomposition rows (j, s, d, t) of the multiples of r modulo q.
    Decompose {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        q: u64,
    },
    /// Q0/Q1 split of Q((r+a)/q) and the g-based approximant of Q0.
    Qsplit {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        m1: u32,
        /// Shift a added to r.
        #[arg(long, default_value_t = 0)]
        a: u64,
        #[arg(long, value_enum, default_value_t = Selection::Scaled)]
        selection: Selection,
    },
    /// Truncated g(alpha; cap).
    GEval {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 4096)]
        cap: u64,
    },
    /// Exact moments of g(.; cap).
    GMoments {
        #[arg(long, default_value_t = 4096)]
        cap: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        k: Vec<u32>,
    },
    /// Count of window numerators whose inverse ratios fall in a box.
    InverseBox {
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        shifts: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long)]
        delta: f64,
        /// Also count over a cells^L partition of the unit cube.
        #[arg(long)]
        cells: Option<u32>,
    },
    /// Mixed exponential sum E(n, m, q) with poles at -a_l.
    ExpSum {
        #[arg(long)]
        q: u64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0)]
        n: i64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        m: Vec<i64>,
        #[arg(long, value_delimiter = ',')]
        shifts: Vec<u64>,
    },
    /// Empirical bound ratios of exponential sums over a range of moduli.
    ExpBounds {
        #[arg(long, value_enum, default_value_t = BoundKind::Mixed)]
        kind: BoundKind,
        #[arg(long, default_value_t = 1000)]
        q_max: u64,
        #[arg(long, default_value_t = 2)]
        q_min: u64,
        #[arg(long, default_value_t = 2)]
        poles: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prime-sum lengths (kind = primes).
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        x: Vec<u64>,
        /// Kloosterman grid side (kind = kloosterman).
        #[arg(long, default_value_t = 20)]
        side: i64,
    },
    /// Joint moments of scaled c0 or Q values at shifted numerators.
    Moments {
        #[arg(long, value_delimiter = ',')]
        q: Vec<u64>,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        shifts: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        k: Vec<u32>,
        #[arg(long, default_value_t = 12)]
        cap_exponent: u32,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        scale: f64,
        #[arg(long, value_enum, default_value_t = Mode::All)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Norm::Count)]
        normalization: Norm,
        #[arg(long, value_enum, default_value_t = MomentOf::C0)]
        of: MomentOf,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Test-function averages, independence gap and KS distance to the g-sample.
    Theorem11 {
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        shifts: Vec<u64>,
        /// One test function per shift: gaussian[:c[:w]], const:v, poly:c0,c1,..[:clip].
        #[arg(long = "f")]
        functions: Vec<String>,
        #[arg(long, default_value_t = 12)]
        cap_exponent: u32,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        scale: f64,
        #[arg(long, value_enum, default_value_t = Mode::All)]
        mode: Mode,
        #[arg(long, default_value_t = cotlab::experiments::DEFAULT_G_SAMPLES)]
        g_samples: usize,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Both sides of the zeta-integral identity for one coprime pair.
    Identity {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        b: u64,
        #[arg(long = "T", default_value_t = 10_000.0)]
        t_max: f64,
        #[arg(long, default_value_t = cotlab::zeta::MAX_STEP)]
        step: f64,
    },
    /// Run every experiment in a configuration file.
    Batch { config: PathBuf },
    /// KS distance to the g-sample as a function of the scale factor.
    Calibrate {
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "2.5,2.75,3,3.14159265358979,3.25,3.5,3.75"
        )]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 12)]
        cap_exponent: u32,
        #[arg(long, default_value_t = cotlab::experiments::DEFAULT_G_SAMPLES)]
        g_samples: usize,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::C0 { .. } => "c0",
            Command::Vasyunin { .. } => "vasyunin",
            Command::Qsum { .. } => "qsum",
            Command::Decompose { .. } => "decompose",
            Command::Qsplit { .. } => "qsplit",
            Command::GEval { .. } => "g-eval",
            Command::GMoments { .. } => "g-moments",
            Command::InverseBox { .. } => "inverse-box",
            Command::ExpSum { .. } => "exp-sum",
            Command::ExpBounds { .. } => "exp-bounds",
            Command::Moments { .. } => "moments",
            Command::Theorem11 { .. } => "theorem11",
            Command::Identity { .. } => "identity",
            Command::Batch { .. } => "batch",
            Command::Calibrate { .. } => "calibrate",
        }
    }
}

/// Resolved configuration echoed into every output.
type Config = BTreeMap<String, String>;

enum Output {
    /// Named scalar results.
    Scalars {
        config: Config,
        values: Vec<(String, f64)>,
    },
    /// A plain integer table.
    Rows {
        config: Config,
        header: Vec<&'static str>,
        rows: Vec<Vec<u64>>,
    },
    Reports(Vec<ExperimentReport>),
}

fn config(command: &str, pairs: &[(&str, String)]) -> Config {
    let mut c = Config::new();
    c.insert("command".into(), command.into());
    for (k, v) in pairs {
        c.insert((*k).into(), v.clone());
    }
    c
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn coprime_fraction(r: u64, b: u64) -> cotlab::Result<FareyFraction> {
    FareyFraction::reduced(r, b)
}

fn run(cmd: &Command) -> cotlab::Result<Output> {
    let name = cmd.name();
    Ok(match cmd {
        Command::C0 { r, b } => {
            let f = coprime_fraction(*r, *b)?;
            Output::Scalars {
                config: config(name, &[("r", r.to_string()), ("b", b.to_string())]),
                values: vec![("c0".into(), cotangent::c0(&f))],
            }
        }
        Command::Vasyunin { r, b } => {
            let f = coprime_fraction(*r, *b)?;
            Output::Scalars {
                config: config(name, &[("r", r.to_string()), ("b", b.to_string())]),
                values: vec![("vasyunin".into(), cotangent::vasyunin(&f))],
            }
        }
        Command::Qsum { r, q } => {
            let pq = PrimeModulus::new(*q)?;
            Output::Scalars {
                config: config(name, &[("r", r.to_string()), ("q", q.to_string())]),
                values: vec![("q_sum".into(), cotangent::q_sum(*r, &pq)?)],
            }
        }
        Command::Decompose { r, q } => {
            let dec = cotangent::decompose(*r, &PrimeModulus::new(*q)?)?;
            Output::Rows {
                config: config(name, &[("r", r.to_string()), ("q", q.to_string())]),
                header: vec!["j", "s", "d", "t"],
                rows: dec
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(j, row)| vec![j as u64, row.s, row.d, row.t])
                    .collect(),
            }
        }
        Command::Qsplit {
            r,
            q,
            m1,
            a,
            selection,
        } => {
            let pq = PrimeModulus::new(*q)?;
            let split = cotangent::q_split(r + a, &pq, *m1, (*selection).into())?;
            let approx = cotangent::q_approx(*r, &pq, *m1, *a)?;
            Output::Scalars {
                config: config(
                    name,
                    &[
                        ("r", r.to_string()),
                        ("q", q.to_string()),
                        ("m1", m1.to_string()),
                        ("a", a.to_string()),
                        ("selection", format!("{selection:?}").to_lowercase()),
                    ],
                ),
                values: vec![
                    ("q0".into(), split.q0),
                    ("q1".into(), split.q1),
                    ("q_sum".into(), split.q0 + split.q1),
                    ("q_approx".into(), approx),
                    ("selected_blocks".into(), split.selected_j.len() as f64),
                ],
            }
        }
        Command::GEval { alpha, cap } => Output::Scalars {
            config: config(name, &[("alpha", sig17(*alpha)), ("cap", cap.to_string())]),
            values: vec![("g".into(), g_trunc(*alpha, *cap))],
        },
        Command::GMoments { cap, k } => {
            let mut values = Vec::new();
            for &kk in k {
                values.push((format!("moment_{kk}"), moment_exact(*cap, kk)?));
                if kk == 2 {
                    if *cap <= 4096 {
                        values.push(("gcd_oracle_2".into(), second_moment_gcd_oracle(*cap)));
                    }
                    values.push(("limit_2".into(), SECOND_MOMENT_LIMIT));
                }
            }
            Output::Scalars {
                config: config(name, &[("cap", cap.to_string()), ("k", join(k))]),
                values,
            }
        }
        Command::InverseBox {
            q,
            window,
            shifts,
            alphas,
            delta,
            cells,
        } => {
            let bx = BoxSpec::new(alphas.clone(), *delta)?;
            let rep = inverse_box_report(
                PrimeModulus::new(*q)?,
                &window.window()?,
                &ShiftSet::new(shifts.clone())?,
                &bx,
                *cells,
            )?;
            Output::Reports(vec![rep])
        }
        Command::ExpSum { q, n, m, shifts } => {
            if m.len() != shifts.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} coefficients for {} shifts",
                    m.len(),
                    shifts.len()
                )));
            }
            let arg = RationalExponentArg::new(
                *n,
                m.iter().copied().zip(shifts.iter().copied()).collect(),
            )?;
            let pq = PrimeModulus::new(*q)?;
            let e = expsums::mixed_exp_sum(pq, &arg)?;
            Output::Scalars {
                config: config(
                    name,
                    &[
                        ("q", q.to_string()),
                        ("n", n.to_string()),
                        ("m", join(m)),
                        ("shifts", join(shifts)),
                    ],
                ),
                values: vec![
                    ("re".into(), e.re),
                    ("im".into(), e.im),
                    ("abs".into(), e.norm()),
                    ("abs_over_sqrt_q".into(), e.norm() / (*q as f64).sqrt()),
                    (
                        "weil_bound".into(),
                        expsums::weil_bound(arg.num_poles(), *q),
                    ),
                ],
            }
        }
        Command::ExpBounds {
            kind,
            q_max,
            q_min,
            poles,
            trials,
            seed,
            x,
            side,
        } => exp_bounds(*kind, *q_min, *q_max, *poles, *trials, *seed, x, *side)?,
        Command::Moments {
            q,
            window,
            shifts,
            k,
            cap_exponent,
            scale,
            mode,
            normalization,
            of,
            sampling,
        } => {
            if q.is_empty() {
                return Err(Error::InvalidArgument(
                    "at least one --q is required".into(),
                ));
            }
            let w = window.window()?;
            let sh = ShiftSet::new(shifts.clone())?;
            let mut spec = MomentSpec::new(k.clone(), *cap_exponent)?;
            spec.scale = *scale;
            spec.mode = (*mode).into();
            spec.normalization = (*normalization).into();
            spec.sampling = sampling.sampling();
            let mut reports = Vec::new();
            for &qv in q {
                log::info!("moments at q = {qv}");
                let pq = PrimeModulus::new(qv)?;
                reports.push(match of {
                    MomentOf::C0 => joint_c0_moments(pq, &w, &sh, &spec)?,
                    MomentOf::Q => joint_q_moments(pq, &w, &sh, &spec)?,
                });
            }
            Output::Reports(reports)
        }
        Command::Theorem11 {
            q,
            window,
            shifts,
            functions,
            cap_exponent,
            scale,
            mode,
            g_samples,
            sampling,
        } => {
            let fs = if functions.is_empty() {
                vec![
                    TestFunction::Gaussian {
                        center: 0.0,
                        width: 1.0
                    };
                    shifts.len()
                ]
            } else {
                functions
                    .iter()
                    .map(|f| f.parse())
                    .collect::<cotlab::Result<Vec<TestFunction>>>()?
            };
            let spec = DistributionSpec {
                cap_exponent: *cap_exponent,
                scale: *scale,
                mode: (*mode).into(),
                g_samples: *g_samples,
                sampling: sampling.sampling(),
            };
            log::info!("distribution check at q = {q}");
            let out = theorem11_check(
                PrimeModulus::new(*q)?,
                &window.window()?,
                &ShiftSet::new(shifts.clone())?,
                &fs,
                &spec,
            )?;
            Output::Reports(vec![out.report])
        }
        Command::Identity { r, b, t_max, step } => {
            log::info!("tabulating |zeta(1/2 + it)|^2 up to T = {t_max}");
            Output::Reports(vec![identity_report(
                &[CoprimePair::new(*r, *b)?],
                *t_max,
                *step,
            )?])
        }
        Command::Batch { config } => {
            let text = fs::read_to_string(config)
                .map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            Output::Reports(run_config(&text)?)
        }
        Command::Calibrate {
            q,
            window,
            scales,
            cap_exponent,
            g_samples,
            sampling,
        } => {
            let w = window.window()?;
            let spec = DistributionSpec {
                cap_exponent: *cap_exponent,
                g_samples: *g_samples,
                sampling: sampling.sampling(),
                ..Default::default()
            };
            let started = std::time::Instant::now();
            let rows = calibrate_scale(PrimeModulus::new(*q)?, &w, scales, &spec)?;
            let mut rep = ExperimentReport::new("calibrate", *q, w, vec![0], sampling.seed);
            rep.config.insert(
                "scales".into(),
                scales
                    .iter()
                    .map(|s| sig17(*s))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            rep.config
                .insert("cap_exponent".into(), cap_exponent.to_string());
            rep.config.insert("g_samples".into(), g_samples.to_string());
            rep.n = w.bounds(*q).1.saturating_sub(w.bounds(*q).0) as usize + 1;
            for (s, ks) in rows {
                rep.push(&format!("ks_scale_{}", sig6(s)), ks, 0.0);
            }
            rep.finish(started);
            Output::Reports(vec![rep])
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn exp_bounds(
    kind: BoundKind,
    q_min: u64,
    q_max: u64,
    poles: usize,
    trials: usize,
    seed: u64,
    x: &[u64],
    side: i64,
) -> cotlab::Result<Output> {
    let started = std::time::Instant::now();
    let qs: Vec<PrimeModulus> = primes_up_to(q_max)
        .into_iter()
        .filter(|&q| q >= q_min)
        .map(PrimeModulus::new)
        .collect::<cotlab::Result<_>>()?;
    let kind_name = match kind {
        BoundKind::Mixed => "exp-bounds-mixed",
        BoundKind::Kloosterman => "exp-bounds-kloosterman",
        BoundKind::Primes => "exp-bounds-primes",
    };
    let mut rep = ExperimentReport::new(kind_name, q_max, Window::default(), Vec::new(), seed);
    rep.config.insert("q_min".into(), q_min.to_string());
    log::info!("{kind_name}: {} moduli", qs.len());
    match kind {
        BoundKind::Mixed => {
            rep.config.insert("poles".into(), poles.to_string());
            rep.config.insert("trials".into(), trials.to_string());
            for row in expsums::bound_ratio_sweep(&qs, poles, trials, seed)?.rows {
                rep.records.push(cotlab::experiments::StatRecord::new(
                    "max_ratio",
                    row.max_ratio,
                    row.weil_ratio,
                    trials,
                    row.q,
                ));
                rep.records.push(cotlab::experiments::StatRecord::new(
                    "mean_ratio",
                    row.mean_ratio,
                    row.weil_ratio,
                    trials,
                    row.q,
                ));
            }
        }
        BoundKind::Kloosterman => {
            rep.config.insert("side".into(), side.to_string());
            use rayon::prelude::*;
            let rows = qs
                .par_iter()
                .map(|&q| Ok((q.get(), expsums::kloosterman_grid_max(q, side)?)))
                .collect::<cotlab::Result<Vec<_>>>()?;
            for (q, max) in rows {
                let sq = (q as f64).sqrt();
                rep.records.push(cotlab::experiments::StatRecord::new(
                    "max_ratio",
                    max / sq,
                    2.0,
                    (side * side) as usize,
                    q,
                ));
            }
        }
        BoundKind::Primes => {
            rep.config.insert("poles".into(), poles.to_string());
            rep.config.insert("trials".into(), trials.to_string());
            rep.config.insert("x".into(), join(x));
            for row in expsums::prime_sum_sweep(&qs, x, poles, trials, seed)? {
                let mut rec = cotlab::experiments::StatRecord::new(
                    "ratio",
                    row.ratio,
                    row.trivial_ratio,
                    row.x as usize,
                    row.q,
                );
                rec.name = format!("ratio_x{}", row.x);
                rep.records.push(rec);
            }
        }
    }
    rep.finish(started);
    Ok(Output::Reports(vec![rep]))
}

fn write_config_echo(out: &mut dyn Write, config: &Config) -> io::Result<()> {
    writeln!(out, "# config_hash = {}", config_hash(config))?;
    for (k, v) in config {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

fn write_table(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

fn render(output: &Output, format: Format, out: &mut dyn Write) -> cotlab::Result<()> {
    match (output, format) {
        (Output::Scalars { config, values }, Format::Table) => {
            write_config_echo(out, config)?;
            if let [(_, v)] = values.as_slice() {
                writeln!(out, "{}", sig17(*v))?;
            } else {
                for (k, v) in values {
                    writeln!(out, "{k} = {}", sig17(*v))?;
                }
            }
        }
        (Output::Scalars { config, values }, Format::Csv) => {
            write_config_echo(out, config)?;
            writeln!(out, "name,value")?;
            for (k, v) in values {
                writeln!(out, "{k},{}", sig17(*v))?;
            }
        }
        (Output::Scalars { config, values }, Format::Json) => {
            let values: serde_json::Map<String, serde_json::Value> = values
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::json!(v)))
                .collect();
            let doc = serde_json::json!({ "config": config, "config_hash": config_hash(config), "values": values });
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
        (
            Output::Rows {
                config,
                header,
                rows,
            },
            Format::Json,
        ) => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::Value::Object(
                        header
                            .iter()
                            .map(|h| h.to_string())
                            .zip(r.iter().map(|v| (*v).into()))
                            .collect(),
                    )
                })
                .collect();
            let doc = serde_json::json!({ "config": config, "config_hash": config_hash(config), "rows": rows });
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
        (
            Output::Rows {
                config,
                header,
                rows,
            },
            fmt,
        ) => {
            write_config_echo(out, config)?;
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| r.iter().map(u64::to_string).collect())
                .collect();
            if fmt == Format::Csv {
                writeln!(out, "{}", header.join(","))?;
                for row in &cells {
                    writeln!(out, "{}", row.join(","))?;
                }
            } else {
                write_table(out, header, &cells)?;
            }
        }
        (Output::Reports(reports), Format::Csv) => write_csv(reports, out)?,
        (Output::Reports(reports), Format::Json) => write_json(reports, out)?,
        (Output::Reports(reports), Format::Table) => {
            for rep in reports {
                writeln!(
                    out,
                    "# report {} config_hash = {}",
                    rep.kind, rep.config_hash
                )?;
                for (k, v) in &rep.config {
                    writeln!(out, "# {k} = {v}")?;
                }
            }
            let rows: Vec<Vec<String>> = reports
                .iter()
                .flat_map(|rep| &rep.records)
                .map(|r| {
                    vec![
                        r.name.clone(),
                        sig6(r.empirical),
                        sig6(r.target),
                        sig6(r.abs_gap),
                        sig6(r.rel_gap),
                        r.n.to_string(),
                        r.q.to_string(),
                        r.runtime_ms.to_string(),
                    ]
                })
                .collect();
            write_table(out, &cotlab::experiments::report::CSV_COLUMNS, &rows)?;
        }
    }
    Ok(())
}

fn usage_for(name: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    cmd.find_subcommand_mut(name)
        .map(|sub| sub.render_usage().to_string())
        .unwrap_or_else(|| Cli::command().render_usage().to_string())
}

fn describe(err: &Error) -> String {
    match err {
        Error::NotCoprime { a, m, gcd } => {
            format!("r and b must be coprime (gcd({a}, {m}) = {gcd})")
        }
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Warn
        } else {
            log::LevelFilter::Info
        })
        .parse_env("COTLAB_LOG")
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let name = cli.command.name();
    let mut output = match run(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return if e.is_numeric_guard() {
                ExitCode::from(3)
            } else if matches!(e, Error::Io(_)) {
                ExitCode::from(1)
            } else {
                eprintln!("{}", usage_for(name));
                ExitCode::from(2)
            };
        }
    };
    if cli.no_timing {
        if let Output::Reports(reports) = &mut output {
            for rep in reports {
                rep.set_runtime(0);
            }
        }
    }

    let result = match &cli.output {
        Some(path) => fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
            .and_then(|f| {
                let mut w = io::BufWriter::new(f);
                render(&output, cli.format, &mut w)?;
                w.flush().map_err(Error::from)
            }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            render(&output, cli.format, &mut w).and_then(|_| w.flush().map_err(Error::from))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
