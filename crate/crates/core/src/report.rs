//! Machine-readable run reports and the frozen CSV layouts.
//!
//! CSV headers:
//! - solution `x,y,u`
//! - level-set trace `k,C_k,U_k,majorant_k,slack_k`
//! - Sobolev ratios `test_id,lhs,rhs,ratio`
//! - cutoff studies `epsilon,I`

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::counterexamples::ConvergenceStudy;
use crate::degiorgi::TraceRow;
use crate::error::{Error, Result};
use crate::geometry::{DomainMask, Grid};
use crate::sobolev::RatioReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
}

/// One inequality `lhs ≤ rhs`, passing when `rhs − lhs ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        let ok = slack >= -tolerance;
        Self { name: name.into(), lhs, rhs, slack, tolerance, verdict: if ok { CheckVerdict::Pass } else { CheckVerdict::Fail } }
    }

    /// `|value − target| ≤ tolerance`, recorded as `lhs = |value − target|`, `rhs = 0`.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, (value - target).abs(), 0.0, tolerance)
    }

    /// Yes/no condition: `lhs = 0` when it holds, `1` otherwise.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 0.0 } else { 1.0 }, 0.0, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.verdict == CheckVerdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: RunConfig,
    pub checks: Vec<CheckRecord>,
    /// Pipeline-specific payload (solver report, studies, ...).
    pub results: serde_json::Map<String, serde_json::Value>,
    pub passed: bool,
}

impl ReportDocument {
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        Self {
            tool: "odlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_hash: config_hash(config),
            started_unix: unix_now(),
            finished_unix: 0,
            config: config.clone(),
            checks: Vec::new(),
            results: serde_json::Map::new(),
            passed: true,
        }
    }

    pub fn check(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    pub fn insert(&mut self, key: &str, value: &impl Serialize) -> Result<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Stamps the finish time and the overall verdict.
    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
        self.passed = self.checks.iter().all(CheckRecord::passed);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn config_hash(config: &RunConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Nodal field over the mask (interior and boundary nodes), row-major.
pub fn write_field_csv(path: &Path, grid: &Grid, mask: &DomainMask, u: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "u"])?;
    for k in (0..grid.len()).filter(|&k| mask.contains(k)) {
        let (x, y) = grid.point(k);
        w.write_record([x.to_string(), y.to_string(), u[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`] back onto `grid`; every interior node must be present.
pub fn read_field_csv(path: &Path, grid: &Grid, mask: &DomainMask) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y", "u"] {
        return Err(Error::Config(format!("{}: expected header x,y,u", path.display())));
    }
    let mut u = vec![f64::NAN; grid.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{}: bad number on data row {}", path.display(), row + 1)))?;
        let k = grid.nearest(v[0], v[1]).filter(|&k| {
            let (x, y) = grid.point(k);
            (x - v[0]).abs() <= 0.25 * grid.h && (y - v[1]).abs() <= 0.25 * grid.h
        });
        let k = k.ok_or_else(|| Error::Config(format!("{}: ({}, {}) is not a node of the configured grid", path.display(), v[0], v[1])))?;
        u[k] = v[2];
    }
    if let Some(k) = (0..grid.len()).find(|&k| mask.is_interior(k) && u[k].is_nan()) {
        return Err(Error::Config(format!("{}: missing value at interior node {:?}", path.display(), grid.point(k))));
    }
    Ok(u.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect())
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "C_k", "U_k", "majorant_k", "slack_k"])?;
    for r in rows {
        w.write_record([r.k.to_string(), r.c_k.to_string(), r.u_k.to_string(), r.majorant_k.to_string(), r.slack_k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ratio_csv(path: &Path, rows: &[RatioReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["test_id", "lhs", "rhs", "ratio"])?;
    for r in rows {
        w.write_record([r.test_id.clone(), r.lhs.to_string(), r.rhs.to_string(), r.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_study_csv(path: &Path, study: &ConvergenceStudy) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epsilon", "I"])?;
    for (e, i) in study.cutoffs.iter().zip(&study.integrals) {
        w.write_record([e.to_string(), i.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn check_verdicts_follow_tolerance() {
        assert!(CheckRecord::new("a", 1.0, 1.0, 0.0).passed());
        assert!(CheckRecord::new("b", 1.0 + 1e-9, 1.0, 1e-8).passed());
        assert!(!CheckRecord::new("c", 2.0, 1.0, 0.5).passed());
        assert!(CheckRecord::close("d", 0.2502, 0.25, 1e-3).passed());
        assert!(!CheckRecord::flag("e", false).passed());
    }

    #[test]
    fn hash_depends_only_on_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.n = 129;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn field_csv_round_trip() {
        let d = Domain::Disk { radius: 1.0 };
        let g = d.grid(17).unwrap();
        let m = d.mask(&g).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| if m.is_interior(k) { 0.1 * k as f64 } else { 0.0 }).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        write_field_csv(&p, &g, &m, &u).unwrap();
        assert_eq!(read_field_csv(&p, &g, &m).unwrap(), u);
        let g2 = d.grid(33).unwrap();
        assert!(read_field_csv(&p, &g2, &d.mask(&g2).unwrap()).is_err());
    }

    #[test]
    fn document_verdict() {
        let mut doc = ReportDocument::new("solve", &RunConfig::default());
        doc.check(CheckRecord::new("ok", 0.0, 1.0, 0.0));
        doc.finish();
        assert!(doc.passed);
        doc.check(CheckRecord::flag("bad", false));
        doc.finish();
        assert!(!doc.passed);
        assert_eq!(doc.failed_checks().count(), 1);
    }
}
