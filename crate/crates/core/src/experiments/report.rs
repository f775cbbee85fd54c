//! Experiment reports and their CSV / JSON serializations.
//!
//! CSV layout: `# key = value` comment lines echoing the configuration, then a
//! header `name,empirical,target,abs_gap,rel_gap,n,q,runtime_ms` and one row per
//! statistic. Floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::numthy::Window;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 8] = [
    "name",
    "empirical",
    "target",
    "abs_gap",
    "rel_gap",
    "n",
    "q",
    "runtime_ms",
];

/// One comparison between an empirical statistic and its theoretical target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub name: String,
    #[serde(with = "nonfinite")]
    pub empirical: f64,
    #[serde(with = "nonfinite")]
    pub target: f64,
    #[serde(with = "nonfinite")]
    pub abs_gap: f64,
    #[serde(with = "nonfinite")]
    pub rel_gap: f64,
    pub n: usize,
    pub q: u64,
    pub runtime_ms: u64,
}

impl StatRecord {
    pub fn new(name: &str, empirical: f64, target: f64, n: usize, q: u64) -> Self {
        let abs_gap = (empirical - target).abs();
        let rel_gap = if target != 0.0 {
            abs_gap / target.abs()
        } else if abs_gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            name: name.to_string(),
            empirical,
            target,
            abs_gap,
            rel_gap,
            n,
            q,
            runtime_ms: 0,
        }
    }

    fn csv_fields(&self) -> [String; 8] {
        [
            self.name.clone(),
            sig17(self.empirical),
            sig17(self.target),
            sig17(self.abs_gap),
            sig17(self.rel_gap),
            self.n.to_string(),
            self.q.to_string(),
            self.runtime_ms.to_string(),
        ]
    }
}

/// Floats that may be infinite or NaN: JSON has no literal for them, so they
/// travel as the strings `inf`, `-inf` and `NaN`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Outcome of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub q: u64,
    pub window: Window,
    pub shifts: Vec<u64>,
    pub records: Vec<StatRecord>,
    /// Number of summands actually averaged.
    pub n: usize,
    pub runtime_ms: u64,
    pub seed: u64,
    /// Resolved configuration, echoed into every serialization.
    pub config: BTreeMap<String, String>,
    /// First 12 hex digits of the SHA-256 of the canonical configuration.
    pub config_hash: String,
}

impl ExperimentReport {
    pub fn new(kind: &str, q: u64, window: Window, shifts: Vec<u64>, seed: u64) -> Self {
        let mut config = BTreeMap::new();
        config.insert("kind".into(), kind.to_string());
        config.insert("q".into(), q.to_string());
        config.insert("window.a0".into(), sig17(window.a0));
        config.insert("window.a1".into(), sig17(window.a1));
        config.insert(
            "shifts".into(),
            shifts
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        config.insert("seed".into(), seed.to_string());
        Self {
            kind: kind.to_string(),
            q,
            window,
            shifts,
            records: Vec::new(),
            n: 0,
            runtime_ms: 0,
            seed,
            config,
            config_hash: String::new(),
        }
    }

    /// Appends a record with the report's `n` and `q`.
    pub fn push(&mut self, name: &str, empirical: f64, target: f64) {
        self.records
            .push(StatRecord::new(name, empirical, target, self.n, self.q));
    }

    /// Stamps runtime on every record and computes the configuration hash.
    pub fn finish(&mut self, started: Instant) {
        self.set_runtime(started.elapsed().as_millis() as u64);
        self.config_hash = config_hash(&self.config);
    }

    pub fn set_runtime(&mut self, runtime_ms: u64) {
        self.runtime_ms = runtime_ms;
        for r in &mut self.records {
            r.runtime_ms = runtime_ms;
        }
    }

    pub fn record(&self, name: &str) -> Option<&StatRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

/// SHA-256 over `key=value\n` lines in key order, truncated to 12 hex digits.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in config {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the configuration echo of every report followed by one CSV table
/// holding the records of all reports.
pub fn write_csv<W: Write>(reports: &[ExperimentReport], mut out: W) -> Result<()> {
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
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for rep in reports {
        for rec in &rep.records {
            w.write_record(rec.csv_fields()).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads back the records written by [`write_csv`], checking the header.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<StatRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Io(format!(
            "unexpected CSV header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// JSON array of full reports, configuration included.
pub fn write_json<W: Write>(reports: &[ExperimentReport], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, reports).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ExperimentReport>> {
    serde_json::from_reader(input).map_err(|e| Error::Io(e.to_string()))
}
