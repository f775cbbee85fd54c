//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [defaults]
//! window.a0 = 0.55
//! window.a1 = 0.95
//!
//! [experiment.ladder]
//! kind = c0-moments
//! q = 10007, 30011
//! shifts = 0
//! moments.k = 2
//! cap_exponent = 12
//! ```
//!
//! Every `[experiment.NAME]` section inherits the keys of `[defaults]` and runs
//! once per listed `q`. Kinds: `inverse-box`, `q-moments`, `c0-moments`,
//! `theorem11`, `identity`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numthy::{PrimeModulus, ShiftSet, Window};
use crate::zeta::CoprimePair;

use super::{
    box_partition_counts, count_inverse_box, identity_report, joint_c0_moments, joint_q_moments,
    theorem11_check, BoxSpec, DistributionSpec, ExperimentReport, MomentSpec, Normalization,
    NumeratorMode, Sampling, TestFunction, MAX_MODULUS,
};

/// Keys accepted in a section.
const KNOWN_KEYS: [&str; 19] = [
    "kind",
    "q",
    "window.a0",
    "window.a1",
    "shifts",
    "moments.k",
    "cap_exponent",
    "scale",
    "mode",
    "normalization",
    "seed",
    "sample_limit",
    "box.alphas",
    "box.delta",
    "box.cells",
    "functions",
    "g_samples",
    "pairs",
    "T",
];

/// What a cell computes.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    InverseBox {
        bx: BoxSpec,
        cells: Option<u32>,
    },
    QMoments(MomentSpec),
    C0Moments(MomentSpec),
    Theorem11 {
        functions: Vec<TestFunction>,
        spec: DistributionSpec,
    },
    Identity {
        pairs: Vec<CoprimePair>,
        t_max: f64,
        step: f64,
    },
}

/// One `[experiment.NAME]` section, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    /// Line of the section header.
    pub line: usize,
    pub q_list: Vec<PrimeModulus>,
    pub window: Window,
    pub shifts: ShiftSet,
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, Default)]
struct RawSection {
    name: String,
    line: usize,
    /// key → (line, value)
    entries: BTreeMap<String, (usize, String)>,
}

fn parse_error(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn split_sections(text: &str) -> Result<(RawSection, Vec<RawSection>)> {
    let mut defaults = RawSection {
        name: "defaults".into(),
        ..Default::default()
    };
    let mut sections: Vec<RawSection> = Vec::new();
    let mut in_defaults = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, "section", "unterminated section header"))?
                .trim();
            if header == "defaults" {
                in_defaults = true;
            } else if let Some(name) = header.strip_prefix("experiment.") {
                if name.is_empty() || sections.iter().any(|s| s.name == name) {
                    return Err(parse_error(
                        line,
                        "section",
                        format!("missing or duplicate experiment name `{name}`"),
                    ));
                }
                in_defaults = false;
                sections.push(RawSection {
                    name: name.to_string(),
                    line,
                    entries: BTreeMap::new(),
                });
            } else {
                return Err(parse_error(
                    line,
                    "section",
                    format!("unknown section `{header}`"),
                ));
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_error(line, key, "unknown key"));
        }
        let target = if in_defaults {
            &mut defaults
        } else {
            match sections.last_mut() {
                Some(s) => s,
                None => return Err(parse_error(line, key, "key outside of any section")),
            }
        };
        if target
            .entries
            .insert(key.to_string(), (line, value.to_string()))
            .is_some()
        {
            return Err(parse_error(line, key, "duplicate key"));
        }
    }
    Ok((defaults, sections))
}

struct Resolver<'a> {
    section: &'a RawSection,
    defaults: &'a RawSection,
}

impl Resolver<'_> {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.section
            .entries
            .get(key)
            .or_else(|| self.defaults.entries.get(key))
            .map(|(l, v)| (*l, v.as_str()))
    }

    fn require(&self, key: &str) -> Result<(usize, &str)> {
        self.get(key).ok_or_else(|| {
            parse_error(
                self.section.line,
                key,
                format!("missing in experiment `{}`", self.section.name),
            )
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.get(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| parse_error(line, key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| {
                parse_error(
                    self.section.line,
                    key,
                    format!("missing in experiment `{}`", self.section.name),
                )
            }),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, sep: char) -> Result<Vec<T>> {
        let (line, v) = self.require(key)?;
        v.split(sep)
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|_| parse_error(line, key, format!("cannot parse `{}`", item.trim())))
            })
            .collect()
    }

    fn with_line<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        let line = self.get(key).map(|(l, _)| l).unwrap_or(self.section.line);
        r.map_err(|e| match e {
            Error::ConfigParse { .. } | Error::Overflow(_) | Error::CapTooLarge { .. } => e,
            other => parse_error(line, key, other.to_string()),
        })
    }
}

fn resolve(section: &RawSection, defaults: &RawSection) -> Result<ExperimentConfig> {
    let res = Resolver { section, defaults };
    let (kind_line, kind) = res.require("kind")?;
    if ![
        "inverse-box",
        "q-moments",
        "c0-moments",
        "theorem11",
        "identity",
    ]
    .contains(&kind)
    {
        return Err(parse_error(
            kind_line,
            "kind",
            format!("unknown experiment kind `{kind}`"),
        ));
    }

    let a0: f64 = res.parse("window.a0", Some(0.55))?;
    let a1: f64 = res.parse("window.a1", Some(0.95))?;
    let window = res
        .with_line("window.a1", Window::relaxed(a0, a1))
        .map_err(|e| match e {
            Error::ConfigParse { line, message, .. } => parse_error(line, "window", message),
            other => other,
        })?;
    let seed: u64 = res.parse("seed", Some(0))?;
    let sampling = Sampling {
        seed,
        sample_limit: res.parse("sample_limit", Some(super::DEFAULT_SAMPLE_LIMIT))?,
    };
    let scale: f64 = res.parse("scale", Some(std::f64::consts::PI))?;
    let mode: NumeratorMode = res.with_line(
        "mode",
        res.get("mode")
            .map_or(Ok(NumeratorMode::AllResidues), |(_, v)| v.parse()),
    )?;

    let q_list = if kind == "identity" {
        Vec::new()
    } else {
        let raw: Vec<u64> = res.list("q", ',')?;
        raw.into_iter()
            .map(|q| {
                if q > MAX_MODULUS {
                    return Err(Error::Overflow(format!(
                        "q = {q} exceeds the experiment limit 2^40"
                    )));
                }
                res.with_line("q", PrimeModulus::new(q))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let shifts = if res.get("shifts").is_some() {
        res.with_line("shifts", ShiftSet::new(res.list("shifts", ',')?))?
    } else {
        ShiftSet::new(vec![0])?
    };

    let moment_spec = |res: &Resolver| -> Result<MomentSpec> {
        let k: Vec<u32> = res.list("moments.k", ',')?;
        let m1: u32 = res.parse("cap_exponent", Some(12))?;
        let mut spec = res.with_line("cap_exponent", MomentSpec::new(k, m1))?;
        spec.scale = scale;
        spec.mode = mode;
        spec.normalization = res.with_line(
            "normalization",
            res.get("normalization")
                .map_or(Ok(Normalization::Count), |(_, v)| v.parse()),
        )?;
        spec.sampling = sampling.clone();
        Ok(spec)
    };

    let kind = match kind {
        "inverse-box" => {
            let alphas: Vec<f64> = res.list("box.alphas", ',')?;
            let delta: f64 = res.parse("box.delta", None)?;
            let bx = res.with_line("box.alphas", BoxSpec::new(alphas, delta))?;
            let cells = res
                .get("box.cells")
                .map(|_| res.parse::<u32>("box.cells", None))
                .transpose()?;
            ExperimentKind::InverseBox { bx, cells }
        }
        "q-moments" => ExperimentKind::QMoments(moment_spec(&res)?),
        "c0-moments" => ExperimentKind::C0Moments(moment_spec(&res)?),
        "theorem11" => {
            let functions: Vec<TestFunction> = res.list("functions", ';')?;
            let spec = DistributionSpec {
                cap_exponent: res.parse("cap_exponent", Some(12))?,
                scale,
                mode,
                g_samples: res.parse("g_samples", Some(super::DEFAULT_G_SAMPLES))?,
                sampling: sampling.clone(),
            };
            ExperimentKind::Theorem11 { functions, spec }
        }
        "identity" => {
            let (line, raw) = res.require("pairs")?;
            let pairs = raw
                .split(',')
                .map(|p| {
                    let (r, b) = p.trim().split_once('/').ok_or_else(|| {
                        parse_error(line, "pairs", format!("expected r/b, got `{}`", p.trim()))
                    })?;
                    let num = |s: &str| {
                        s.trim()
                            .parse::<u64>()
                            .map_err(|_| parse_error(line, "pairs", format!("cannot parse `{s}`")))
                    };
                    res.with_line("pairs", CoprimePair::new(num(r)?, num(b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            ExperimentKind::Identity {
                pairs,
                t_max: res.parse("T", Some(10_000.0))?,
                step: crate::zeta::MAX_STEP,
            }
        }
        _ => unreachable!("kind validated above"),
    };
    Ok(ExperimentConfig {
        name: section.name.clone(),
        line: section.line,
        q_list,
        window,
        shifts,
        kind,
    })
}

/// Parses a configuration into its experiments, in file order.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let (defaults, sections) = split_sections(text)?;
    sections.iter().map(|s| resolve(s, &defaults)).collect()
}

/// Runs one experiment: one report per listed `q` (a single report for `identity`).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let tag = |mut rep: ExperimentReport| {
        rep.config.insert("experiment".into(), cfg.name.clone());
        rep.config_hash = super::report::config_hash(&rep.config);
        rep
    };
    if let ExperimentKind::Identity { pairs, t_max, step } = &cfg.kind {
        return Ok(vec![tag(identity_report(pairs, *t_max, *step)?)]);
    }
    cfg.q_list
        .iter()
        .map(|&q| {
            let rep = match &cfg.kind {
                ExperimentKind::InverseBox { bx, cells } => {
                    inverse_box_report(q, &cfg.window, &cfg.shifts, bx, *cells)?
                }
                ExperimentKind::QMoments(spec) => {
                    joint_q_moments(q, &cfg.window, &cfg.shifts, spec)?
                }
                ExperimentKind::C0Moments(spec) => {
                    joint_c0_moments(q, &cfg.window, &cfg.shifts, spec)?
                }
                ExperimentKind::Theorem11 { functions, spec } => {
                    theorem11_check(q, &cfg.window, &cfg.shifts, functions, spec)?.report
                }
                ExperimentKind::Identity { .. } => unreachable!("handled above"),
            };
            Ok(tag(rep))
        })
        .collect()
}

/// Box count as a report: `N` against `δ^L (A1−A0) q`, plus the partition
/// total against the window size when `cells` is given.
pub fn inverse_box_report(
    q: PrimeModulus,
    w: &Window,
    shifts: &ShiftSet,
    bx: &BoxSpec,
    cells: Option<u32>,
) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    let count = count_inverse_box(q, w, shifts, bx)?;
    let mut rep = ExperimentReport::new("inverse-box", q.get(), *w, shifts.as_slice().to_vec(), 0);
    rep.config.insert(
        "box.alphas".into(),
        bx.alphas
            .iter()
            .map(|a| crate::format::sig17(*a))
            .collect::<Vec<_>>()
            .join(","),
    );
    rep.config
        .insert("box.delta".into(), crate::format::sig17(bx.delta));
    rep.n = count.window_size as usize;
    rep.push("box_count", count.count as f64, count.target);
    rep.push("box_ratio", count.count as f64 / count.target, 1.0);
    if let Some(cells) = cells {
        rep.config.insert("box.cells".into(), cells.to_string());
        let counts = box_partition_counts(q, w, shifts, cells)?;
        rep.push(
            "partition_total",
            counts.iter().sum::<u64>() as f64,
            count.window_size as f64,
        );
    }
    rep.finish(started);
    Ok(rep)
}

/// Parses and runs every experiment in `text`, in order.
pub fn run_config(text: &str) -> Result<Vec<ExperimentReport>> {
    let mut out = Vec::new();
    for cfg in parse_config(text)? {
        log::info!(
            "running experiment `{}` ({} cells)",
            cfg.name,
            cfg.q_list.len().max(1)
        );
        out.extend(run_experiment(&cfg)?);
    }
    Ok(out)
}
