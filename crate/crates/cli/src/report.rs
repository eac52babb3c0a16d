//! Report records and their JSON and CSV renderings.

use std::io::Write;
use std::path::Path;

use rrl_core::analysis::Fraction;
use rrl_core::Prob;
use serde::{Serialize, Serializer};
use serde_json::Value as Json;

use crate::config::{CheckKind, ExperimentConfig};
use crate::error::CliError;

/// One reported number or label. Exact quantities stay integer pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Exact(Prob),
    Count(u128),
    Flag(bool),
    Real(f64),
    Text(String),
}

impl Metric {
    fn csv(&self) -> String {
        match self {
            Metric::Exact(p) => format!("{}/{}", p.numer(), p.denom()),
            Metric::Count(c) => c.to_string(),
            Metric::Flag(b) => b.to_string(),
            Metric::Real(x) => format!("{x}"),
            Metric::Text(t) => t.clone(),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Metric::Exact(p) => Fraction::from(*p).serialize(s),
            Metric::Count(c) => c.serialize(s),
            Metric::Flag(b) => b.serialize(s),
            Metric::Real(x) => x.serialize(s),
            Metric::Text(t) => t.serialize(s),
        }
    }
}

impl From<Prob> for Metric {
    fn from(p: Prob) -> Self {
        Metric::Exact(p)
    }
}

impl From<u64> for Metric {
    fn from(c: u64) -> Self {
        Metric::Count(c.into())
    }
}

impl From<u128> for Metric {
    fn from(c: u128) -> Self {
        Metric::Count(c)
    }
}

impl From<usize> for Metric {
    fn from(c: usize) -> Self {
        Metric::Count(c as u128)
    }
}

impl From<bool> for Metric {
    fn from(b: bool) -> Self {
        Metric::Flag(b)
    }
}

impl From<f64> for Metric {
    fn from(x: f64) -> Self {
        Metric::Real(x)
    }
}

impl From<String> for Metric {
    fn from(t: String) -> Self {
        Metric::Text(t)
    }
}

impl From<&str> for Metric {
    fn from(t: &str) -> Self {
        Metric::Text(t.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    #[serde(serialize_with = "check_name")]
    pub check: CheckKind,
    pub passed: bool,
    pub summary: String,
    #[serde(serialize_with = "metric_map")]
    pub metrics: Vec<(String, Metric)>,
    /// What a failing check found, in enough detail to replay it.
    pub witness: Option<Json>,
}

fn check_name<S: Serializer>(c: &CheckKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(c.name())
}

fn metric_map<S: Serializer>(m: &[(String, Metric)], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, v)?;
    }
    map.end()
}

impl CheckResult {
    pub fn new(check: CheckKind, passed: bool, summary: impl Into<String>) -> Self {
        CheckResult { check, passed, summary: summary.into(), metrics: Vec::new(), witness: None }
    }

    pub fn metric(mut self, key: &str, value: impl Into<Metric>) -> Self {
        self.metrics.push((key.to_string(), value.into()));
        self
    }

    pub fn witness(mut self, witness: Option<Json>) -> Self {
        self.witness = witness;
        self
    }

    pub fn line(&self) -> String {
        format!("{}: {} ({})", self.check.name(), if self.passed { "PASS" } else { "FAIL" }, self.summary)
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport<'a> {
    pub config: &'a ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport<'_> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// Long format: one `check,metric,value` row per number; the first row carries the config.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(["check", "metric", "value"]).map_err(csv_err)?;
        let config = serde_json::to_string(self.config).expect("config serializes");
        w.write_record(["config", "resolved", &config]).map_err(csv_err)?;
        for c in &self.checks {
            let name = c.check.name();
            w.write_record([name, "passed", &c.passed.to_string()]).map_err(csv_err)?;
            w.write_record([name, "summary", &c.summary]).map_err(csv_err)?;
            for (k, v) in &c.metrics {
                w.write_record([name, k.as_str(), &v.csv()]).map_err(csv_err)?;
            }
            if let Some(witness) = &c.witness {
                w.write_record([name, "witness", &witness.to_string()]).map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// Write `contents` to `path` through a sibling temporary file, so readers see
/// either nothing or the whole file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
