//! JSON run configuration for the `odlab` pipelines.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "domain": "disk(1)", "operator": "identity", "young": "bump(2)",
//!   "f": "constant(-1)", "n": 129, "tol": 1e-10, "plots": true,
//!   "degiorgi": { "tau": 2, "c": 0.5, "eps": 1, "levels": 20 },
//!   "sobolev": { "budget": 12, "families": ["tent", "sine"] },
//!   "subunit": { "from": [0, 0], "to": [0, 0.25], "rho": 0.5 },
//!   "counterexample": { "case": "finite", "m": 1, "q": 2, "expect": "diverges" }
//! }
//! ```
//!
//! Paths inside `tabulated(..)` and `custom(..)` are resolved relative to the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counterexamples::{laplacian_f, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainMask, Grid, MatrixField};
use crate::young::{parse_young, split_call, YoungFunction};

pub const MIN_SOLVER_N: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub domain: String,
    pub operator: String,
    pub young: String,
    pub f: String,
    pub n: usize,
    pub tol: f64,
    pub output_dir: Option<String>,
    pub plots: bool,
    pub degiorgi: DeGiorgiConfig,
    pub sobolev: SobolevConfig,
    pub subunit: SubunitConfig,
    pub counterexample: CounterexampleConfig,
    pub norms: NormsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            domain: "disk(1)".into(),
            operator: "identity".into(),
            young: "bump(2)".into(),
            f: "constant(-1)".into(),
            n: 65,
            tol: 1e-10,
            output_dir: None,
            plots: true,
            degiorgi: DeGiorgiConfig::default(),
            sobolev: SobolevConfig::default(),
            subunit: SubunitConfig::default(),
            counterexample: CounterexampleConfig::default(),
            norms: NormsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeGiorgiConfig {
    pub tau: f64,
    pub c: f64,
    pub eps: f64,
    pub levels: usize,
    pub k_max: usize,
    pub u0_target: f64,
    /// Solution CSV `x,y,u` from an earlier `solve`; solved afresh when absent.
    pub solution: Option<String>,
}

impl Default for DeGiorgiConfig {
    fn default() -> Self {
        Self { tau: 1.0, c: 0.5, eps: 1.0, levels: 20, k_max: 100, u0_target: 1e-6, solution: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevConfig {
    pub budget: usize,
    /// Test ids to keep; the whole family when absent.
    pub families: Option<Vec<String>>,
    /// Young function for the ratio; the top-level one when absent.
    pub young: Option<String>,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        Self { budget: 12, families: None, young: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubunitConfig {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub rho: f64,
}

impl Default for SubunitConfig {
    fn default() -> Self {
        Self { from: [0.0, 0.0], to: [0.0, 0.25], rho: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Laplacian,
    Finite,
    Infinite,
}

/// Expected verdict; `auto` takes the analytic one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Auto,
    Converges,
    Diverges,
}

impl Expectation {
    pub fn resolve(self, analytic: Verdict) -> Verdict {
        match self {
            Expectation::Auto => analytic,
            Expectation::Converges => Verdict::Converges,
            Expectation::Diverges => Verdict::Diverges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub case: CaseKind,
    /// Defaults to 0.25 for `laplacian` and 0.5 for `infinite`.
    pub alpha: Option<f64>,
    pub m: f64,
    pub q: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub rho: f64,
    pub cutoffs: usize,
    pub expect: Expectation,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { case: CaseKind::Finite, alpha: None, m: 1.0, q: 2.0, big_m: 8.0, rho: 0.3, cutoffs: 40, expect: Expectation::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    pub fields: usize,
    pub seed: u64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self { fields: 6, seed: 7 }
    }
}

impl CounterexampleConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(if self.case == CaseKind::Laplacian { 0.25 } else { 0.5 })
    }
}

impl RunConfig {
    /// Parses JSON text, reporting the line and column of syntax and schema errors.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("configuration is empty".into()));
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| located(&e))?;
        match &value {
            serde_json::Value::Object(m) if m.is_empty() => return Err(Error::Config("configuration is empty".into())),
            serde_json::Value::Object(_) => {}
            _ => return Err(Error::Config("configuration must be a JSON object".into())),
        }
        serde_json::from_str(text).map_err(|e| located(&e))
    }

    /// Reads a config file and rebases relative data paths onto its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        for s in [&mut self.operator, &mut self.young, &mut self.f] {
            *s = rebase_spec(s, base);
        }
        if let Some(y) = self.sobolev.young.as_mut() {
            *y = rebase_spec(y, base);
        }
        if let Some(p) = self.degiorgi.solution.as_mut() {
            *p = rebase_path(p, base);
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        field("domain", Domain::parse(&self.domain))
    }

    pub fn operator(&self) -> Result<MatrixField> {
        field("operator", MatrixField::parse(&self.operator))
    }

    pub fn young(&self) -> Result<YoungFunction> {
        field("young", parse_young(&self.young))
    }

    pub fn sobolev_young(&self) -> Result<YoungFunction> {
        match &self.sobolev.young {
            Some(s) => field("sobolev.young", parse_young(s)),
            None => self.young(),
        }
    }

    pub fn load_spec(&self) -> Result<LoadSpec> {
        field("f", LoadSpec::parse(&self.f))
    }

    /// Checks the keys a subcommand relies on; other sections are ignored.
    pub fn validate_for(&self, sub: &str) -> Result<()> {
        let needs_solver = matches!(sub, "solve" | "degiorgi" | "sobolev" | "all");
        let needs_grid = needs_solver || matches!(sub, "norms" | "subunit");
        if needs_grid {
            self.domain()?;
            self.operator()?;
            if self.n < 3 {
                return Err(Error::Config(format!("field `n`: grid needs at least 3 nodes per side, got {}", self.n)));
            }
        }
        if needs_solver {
            if self.n < MIN_SOLVER_N {
                return Err(Error::Config(format!("field `n`: solver runs need n >= {MIN_SOLVER_N}, got {}", self.n)));
            }
            if !(self.tol > 0.0 && self.tol < 1.0) {
                return Err(Error::Config(format!("field `tol`: must lie in (0, 1), got {}", self.tol)));
            }
            self.load_spec()?;
        }
        if matches!(sub, "degiorgi" | "all") {
            self.young()?;
            let d = &self.degiorgi;
            if !(d.tau >= 1.0) || !(d.c > 0.0 && d.c < 1.0) || !(d.eps > 0.0) {
                return Err(Error::Config("section `degiorgi`: need tau >= 1, 0 < c < 1, eps > 0".into()));
            }
            if d.levels < 2 || d.k_max < 1 || !(d.u0_target > 0.0) {
                return Err(Error::Config("section `degiorgi`: need levels >= 2, k_max >= 1, u0_target > 0".into()));
            }
        }
        if matches!(sub, "sobolev" | "all") {
            self.sobolev_young()?;
            if self.sobolev.budget == 0 {
                return Err(Error::Config("field `sobolev.budget`: must be at least 1".into()));
            }
            if let Some(ids) = &self.sobolev.families {
                let known = crate::sobolev::FAMILY_IDS;
                if let Some(bad) = ids.iter().find(|i| !known.contains(&i.as_str())) {
                    return Err(Error::Config(format!("field `sobolev.families`: unknown test id `{bad}` (known: {})", known.join(", "))));
                }
                if ids.is_empty() {
                    return Err(Error::Config("field `sobolev.families`: empty selection".into()));
                }
            }
        }
        if matches!(sub, "norms" | "all") {
            self.young()?;
            if self.norms.fields == 0 {
                return Err(Error::Config("field `norms.fields`: must be at least 1".into()));
            }
        }
        if matches!(sub, "subunit" | "all") && !(self.subunit.rho > 0.0) {
            return Err(Error::Config("field `subunit.rho`: must be positive".into()));
        }
        if matches!(sub, "counterexample" | "all") {
            let c = &self.counterexample;
            let (a, rho_ok) = (c.alpha(), c.rho > 0.0 && c.rho < 1.0);
            let (ok, need) = match c.case {
                CaseKind::Laplacian => (a > 0.0 && a < 0.5 && c.q > 0.0, "0 < alpha < 1/2, q > 0"),
                CaseKind::Finite => (c.m > 0.0 && c.q > 0.0 && rho_ok, "m > 0, q > 0, 0 < rho < 1"),
                CaseKind::Infinite => (a > 0.0 && c.big_m >= 1.0 && rho_ok, "alpha > 0, M >= 1, 0 < rho < 1"),
            };
            if !ok {
                return Err(Error::Config(format!("section `counterexample`: case {:?} needs {need}", c.case).to_lowercase()));
            }
            if c.cutoffs < 3 {
                return Err(Error::Config("field `counterexample.cutoffs`: need at least 3 halvings".into()));
            }
        }
        Ok(())
    }
}

fn located(e: &serde_json::Error) -> Error {
    Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
}

/// Tags a parse failure with the offending key.
fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) | Error::InvalidArgument(m) => Error::Config(format!("field `{name}`: {m}")),
        Error::Io(io) => Error::Config(format!("field `{name}`: {io}")),
        Error::Csv(c) => Error::Config(format!("field `{name}`: {c}")),
        other => Error::Config(format!("field `{name}`: {other}")),
    })
}

fn rebase_path(p: &str, base: &Path) -> String {
    let path = Path::new(p.trim());
    if path.is_absolute() || base.as_os_str().is_empty() {
        p.trim().to_string()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}

/// Rewrites the argument of every `tabulated(..)` and `custom(..)` inside a spec string.
pub fn rebase_spec(spec: &str, base: &Path) -> String {
    let mut out = String::new();
    let mut rest = spec;
    loop {
        let hit = ["tabulated(", "custom("].iter().filter_map(|k| rest.find(k).map(|i| (i, k.len()))).min();
        let Some((i, len)) = hit else { break };
        let start = i + len;
        let Some(close) = rest[start..].find(')') else { break };
        out.push_str(&rest[..start]);
        out.push_str(&rebase_path(&rest[start..start + close], base));
        rest = &rest[start + close..];
    }
    out.push_str(rest);
    out
}

/// Load `f` of the Dirichlet problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadSpec {
    Constant(f64),
    /// `Δ(ln 1/r)^α`, singular at the origin.
    RadialLog(f64),
    /// CSV `x,y,f` with one row per domain node.
    Custom(PathBuf),
}

impl LoadSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = split_call(spec.trim()).ok_or_else(|| Error::Config(format!("unrecognised load `{spec}`")))?;
        let num = || arg.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number in load `{spec}`")));
        match head {
            "constant" => {
                let v = num()?;
                if !v.is_finite() {
                    return Err(Error::Config(format!("load must be finite in `{spec}`")));
                }
                Ok(LoadSpec::Constant(v))
            }
            "radial_log" => {
                let a = num()?;
                if !(a > 0.0) {
                    return Err(Error::Config(format!("radial_log needs alpha > 0 in `{spec}`")));
                }
                Ok(LoadSpec::RadialLog(a))
            }
            "custom" => Ok(LoadSpec::Custom(PathBuf::from(arg.trim()))),
            _ => Err(Error::Config(format!("unknown load `{head}`"))),
        }
    }

    /// Nodal values on the grid; zero off the mask.
    ///
    /// `radial_log` is evaluated at `max(r, h/4)` so that the origin node carries a finite value,
    /// and requires the domain inside the unit disk where `ln(1/r) > 0`.
    pub fn sample(&self, grid: &Grid, mask: &DomainMask) -> Result<Vec<f64>> {
        match self {
            LoadSpec::Constant(v) => Ok((0..grid.len()).map(|k| if mask.contains(k) { *v } else { 0.0 }).collect()),
            LoadSpec::RadialLog(alpha) => {
                let mut f = vec![0.0; grid.len()];
                for k in (0..grid.len()).filter(|&k| mask.contains(k)) {
                    let (x, y) = grid.point(k);
                    let r = x.hypot(y).max(0.25 * grid.h);
                    if r >= 1.0 {
                        return Err(Error::Config("radial_log needs the domain inside the open unit disk".into()));
                    }
                    f[k] = laplacian_f(*alpha, r);
                }
                Ok(f)
            }
            LoadSpec::Custom(path) => load_nodal_csv(path, grid, mask),
        }
    }
}

fn load_nodal_csv(path: &Path, grid: &Grid, mask: &DomainMask) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let (cx, cy, cf) = (col("x")?, col("y")?, col("f")?);
    let mut f = vec![f64::NAN; grid.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad number on data row {}", path.display(), line + 1)))
        };
        let (x, y, v) = (get(cx)?, get(cy)?, get(cf)?);
        let k = grid.nearest(x, y).ok_or_else(|| Error::Config(format!("{}: point ({x}, {y}) lies off the grid", path.display())))?;
        let (gx, gy) = grid.point(k);
        if (gx - x).abs() > 0.25 * grid.h || (gy - y).abs() > 0.25 * grid.h {
            return Err(Error::Config(format!("{}: point ({x}, {y}) is not a grid node", path.display())));
        }
        f[k] = v;
    }
    if let Some(k) = (0..grid.len()).find(|&k| mask.contains(k) && f[k].is_nan()) {
        let (x, y) = grid.point(k);
        return Err(Error::Config(format!("{}: no value for domain node ({x}, {y})", path.display())));
    }
    Ok(f.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(RunConfig::from_json(""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json("  {} "), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json("[1]"), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RunConfig::from_json("{\n  \"n\": 65,\n  \"bogus\": 1\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = RunConfig::from_json(r#"{"n": 129, "counterexample": {"M": 5}}"#).unwrap();
        assert_eq!(c.n, 129);
        assert_eq!(c.domain, "disk(1)");
        assert_eq!(c.counterexample.big_m, 5.0);
        c.validate_for("all").unwrap();
    }

    #[test]
    fn small_grid_rejected_for_solver_only() {
        let c = RunConfig::from_json(r#"{"n": 9}"#).unwrap();
        assert!(c.validate_for("solve").is_err());
        assert!(c.validate_for("subunit").is_ok());
        assert!(c.validate_for("counterexample").is_ok());
    }

    #[test]
    fn bad_names_name_the_field() {
        let c = RunConfig::from_json(r#"{"operator": "diag_g(cubic(2))"}"#).unwrap();
        let e = c.validate_for("solve").unwrap_err().to_string();
        assert!(e.contains("`operator`"), "{e}");
        let c = RunConfig::from_json(r#"{"sobolev": {"families": ["tent", "zigzag"]}}"#).unwrap();
        assert!(c.validate_for("sobolev").unwrap_err().to_string().contains("zigzag"));
    }

    #[test]
    fn rebase_rewrites_only_relative_paths() {
        let base = Path::new("/data/run");
        assert_eq!(rebase_spec("diag_g(custom(g.csv))", base), "diag_g(custom(/data/run/g.csv))");
        assert_eq!(rebase_spec("composed_square(tabulated(/abs/t.csv))", base), "composed_square(tabulated(/abs/t.csv))");
        assert_eq!(rebase_spec("bump(2)", base), "bump(2)");
    }

    #[test]
    fn load_specs_sample() {
        let d = Domain::Disk { radius: 0.5 };
        let g = d.grid(17).unwrap();
        let m = d.mask(&g).unwrap();
        let f = LoadSpec::parse("radial_log(1.5)").unwrap().sample(&g, &m).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        let c = g.nearest(0.0, 0.0).unwrap();
        assert!(f[c] > 0.0, "alpha > 1 gives a positive singular load");
        let big = Domain::Disk { radius: 1.0 };
        let g2 = big.grid(17).unwrap();
        assert!(LoadSpec::RadialLog(1.5).sample(&g2, &big.mask(&g2).unwrap()).is_err());
        assert!(LoadSpec::parse("gaussian(1)").is_err());
    }

    #[test]
    fn custom_load_round_trip() {
        let d = Domain::Square { side: 1.0 };
        let g = d.grid(5).unwrap();
        let m = d.mask(&g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let mut w = csv::Writer::from_path(&p).unwrap();
        w.write_record(["x", "y", "f"]).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.point(k);
            w.write_record([x.to_string(), y.to_string(), (x + y).to_string()]).unwrap();
        }
        w.flush().unwrap();
        let f = LoadSpec::Custom(p.clone()).sample(&g, &m).unwrap();
        let (x, y) = g.point(7);
        assert!((f[7] - (x + y)).abs() < 1e-12);
        std::fs::write(&p, "x,y,f\n0,0,1\n").unwrap();
        assert!(LoadSpec::Custom(p).sample(&g, &m).is_err());
    }
}
