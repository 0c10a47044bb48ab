//! `odlab`: configuration-driven pipelines with JSON/CSV/SVG output.
//!
//! Exit codes: 0 when every check passes, 1 when a check or a numerical step fails,
//! 2 for usage and configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{CaseKind, Expectation, RunConfig};
use crate::counterexamples::{
    finite_vanishing_report, infinite_vanishing_report, laplacian_example, membership_report_w12a, ConvergenceStudy, CutoffChi,
    VanishingProfile, Verdict,
};
use crate::degiorgi::{degiorgi_study, DeGiorgiOptions};
use crate::dirichlet::{assemble, lax_milgram_from_stiffness, poincare_from_stiffness, solve_dirichlet, weak_residual, WeakProblem};
use crate::error::Error;
use crate::geometry::{subunit_ball, subunit_distance, subunit_sweep, Domain};
use crate::orlicz::{holder_defect, luxembourg_norm, orlicz_norm_dual, square_composition_check};
use crate::plot::Plot;
use crate::report::{read_field_csv, write_field_csv, write_ratio_csv, write_study_csv, write_trace_csv, CheckRecord, ReportDocument};
use crate::sobolev::{best_constant_search_with, necessity_chain_check, test_family, Setting};
use crate::young::YoungFunction;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "ODLAB_OUT_DIR";
const DEFAULT_OUT: &str = "odlab-out";

#[derive(Debug, Parser)]
#[command(name = "odlab", version, about = "Orlicz norms, degenerate Dirichlet solves and sharpness studies")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; beats the config's `output_dir`.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_plots: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ProblemArgs {
    /// `disk(radius)` or `square(side)`.
    #[arg(long)]
    pub domain: Option<String>,
    /// `identity` or `diag_g(power(m) | exp_alpha(a) | custom(path))`.
    #[arg(long)]
    pub operator: Option<String>,
    /// Load: `constant(v)`, `radial_log(alpha)` or `custom(path)`.
    #[arg(long)]
    pub f: Option<String>,
    /// Nodes per side.
    #[arg(long)]
    pub n: Option<usize>,
    /// Relative residual target of the linear solver.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Dirichlet problem and write `solution.csv`.
    Solve(ProblemArgs),
    /// Orlicz norms of random fields: dual sandwich, Hölder, square composition.
    Norms {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        young: Option<String>,
        #[arg(long)]
        fields: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Subunit distance between two points and the ball around the first.
    Subunit {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Start point `x,y`.
        #[arg(long, value_parser = parse_point)]
        from: Option<[f64; 2]>,
        /// End point `x,y`.
        #[arg(long, value_parser = parse_point)]
        to: Option<[f64; 2]>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Level-set energy iteration on a solution; emits the `k,C_k,U_k,majorant_k,slack_k` trace.
    Degiorgi {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        young: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        /// Solution CSV from `solve`; solved afresh when absent.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Orlicz-Sobolev constant search and the necessity chain.
    Sobolev {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        young: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        /// Test id to include (repeatable); all when absent.
        #[arg(long = "family")]
        families: Vec<String>,
    },
    /// Cutoff refinement study of a degenerate example.
    Counterexample {
        #[arg(long, value_enum)]
        case: Option<CaseKind>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long = "M")]
        big_m: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        /// Number of cutoff halvings.
        #[arg(long)]
        cutoffs: Option<usize>,
        #[arg(long, value_enum)]
        expect: Option<Expectation>,
    },
    /// Every pipeline in turn, plus a combined report.
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Norms { .. } => "norms",
            Command::Subunit { .. } => "subunit",
            Command::Degiorgi { .. } => "degiorgi",
            Command::Sobolev { .. } => "sobolev",
            Command::Counterexample { .. } => "counterexample",
            Command::All => "all",
        }
    }
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("expected `x,y`: {e}"))?;
    match v.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err("expected exactly two coordinates `x,y`".into()),
    }
}

/// How a pipeline stopped early.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { step: String, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical { .. } => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical { step, message } => write!(f, "numerical failure in {step}: {message}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Attaches a step name to library errors; configuration-type errors stay configuration errors.
trait Step<T> {
    fn step(self, name: &str) -> Outcome<T>;
}

impl<T> Step<T> for crate::Result<T> {
    fn step(self, name: &str) -> Outcome<T> {
        self.map_err(|e| match e {
            Error::Config(m) => Failure::Config(m),
            Error::Csv(c) => Failure::Config(format!("{name}: {c}")),
            other => Failure::Numerical { step: name.to_string(), message: other.to_string() },
        })
    }
}

fn io<T>(r: crate::Result<T>, what: &Path) -> Outcome<T> {
    r.map_err(|e| Failure::Numerical { step: format!("writing {}", what.display()), message: e.to_string() })
}

/// Entry point used by the binary: parses `args`, runs, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(doc) => {
            println!("{}: {} checks, {} failed", doc.subcommand, doc.checks.len(), doc.failed_checks().count());
            for c in doc.failed_checks() {
                eprintln!("check failed: {} (lhs {:e}, rhs {:e}, slack {:e}, tolerance {:e})", c.name, c.lhs, c.rhs, c.slack, c.tolerance);
            }
            if doc.passed {
                0
            } else {
                1
            }
        }
        Err(f) => {
            eprintln!("odlab: {f}");
            f.exit_code()
        }
    }
}

/// Resolves the configuration, runs the pipeline and writes every artefact.
pub fn run(cli: Cli) -> Outcome<ReportDocument> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).step("config")?,
        None => RunConfig::default(),
    };
    apply_flags(&mut cfg, &cli.command);
    if cli.no_plots {
        cfg.plots = false;
    }
    let sub = cli.command.name();
    cfg.subcommand = Some(sub.to_string());
    cfg.validate_for(sub).step("config")?;
    let out = cli.out.clone().or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", out.display())))?;
    run_config(&cfg, sub, &out)
}

fn apply_flags(cfg: &mut RunConfig, cmd: &Command) {
    fn problem(cfg: &mut RunConfig, p: &ProblemArgs) {
        if let Some(v) = &p.domain {
            cfg.domain = v.clone()
        }
        if let Some(v) = &p.operator {
            cfg.operator = v.clone()
        }
        if let Some(v) = &p.f {
            cfg.f = v.clone()
        }
        if let Some(v) = p.n {
            cfg.n = v
        }
        if let Some(v) = p.tol {
            cfg.tol = v
        }
    }
    match cmd {
        Command::Solve(p) => problem(cfg, p),
        Command::Norms { problem: p, young, fields, seed } => {
            problem(cfg, p);
            if let Some(v) = young {
                cfg.young = v.clone()
            }
            if let Some(v) = fields {
                cfg.norms.fields = *v
            }
            if let Some(v) = seed {
                cfg.norms.seed = *v
            }
        }
        Command::Subunit { problem: p, from, to, rho } => {
            problem(cfg, p);
            if let Some(v) = from {
                cfg.subunit.from = *v
            }
            if let Some(v) = to {
                cfg.subunit.to = *v
            }
            if let Some(v) = rho {
                cfg.subunit.rho = *v
            }
        }
        Command::Degiorgi { problem: p, young, tau, levels, solution } => {
            problem(cfg, p);
            if let Some(v) = young {
                cfg.young = v.clone()
            }
            if let Some(v) = tau {
                cfg.degiorgi.tau = *v
            }
            if let Some(v) = levels {
                cfg.degiorgi.levels = *v
            }
            if let Some(v) = solution {
                cfg.degiorgi.solution = Some(v.to_string_lossy().into_owned())
            }
        }
        Command::Sobolev { problem: p, young, budget, families } => {
            problem(cfg, p);
            if let Some(v) = young {
                cfg.sobolev.young = Some(v.clone())
            }
            if let Some(v) = budget {
                cfg.sobolev.budget = *v
            }
            if !families.is_empty() {
                cfg.sobolev.families = Some(families.clone())
            }
        }
        Command::Counterexample { case, alpha, m, q, big_m, rho, cutoffs, expect } => {
            let c = &mut cfg.counterexample;
            if let Some(v) = case {
                c.case = *v
            }
            if let Some(v) = alpha {
                c.alpha = Some(*v)
            }
            if let Some(v) = m {
                c.m = *v
            }
            if let Some(v) = q {
                c.q = *v
            }
            if let Some(v) = big_m {
                c.big_m = *v
            }
            if let Some(v) = rho {
                c.rho = *v
            }
            if let Some(v) = cutoffs {
                c.cutoffs = *v
            }
            if let Some(v) = expect {
                c.expect = *v
            }
        }
        Command::All => {}
    }
}

/// Runs a validated configuration into `out`; `sub` names the pipeline.
pub fn run_config(cfg: &RunConfig, sub: &str, out: &Path) -> Outcome<ReportDocument> {
    let mut plots = Vec::new();
    let doc = match sub {
        "solve" => solve_pipeline(cfg, out).map(|(d, _)| d)?,
        "norms" => norms_pipeline(cfg, out)?,
        "subunit" => subunit_pipeline(cfg, out)?,
        "degiorgi" => degiorgi_pipeline(cfg, out, None, &mut plots)?,
        "sobolev" => sobolev_pipeline(cfg, out, &mut plots)?,
        "counterexample" => counterexample_pipeline(cfg, out, &mut plots)?,
        "all" => all_pipeline(cfg, out, &mut plots)?,
        other => return Err(Failure::Config(format!("unknown subcommand `{other}`"))),
    };
    if cfg.plots {
        emit_plots(&plots, out)?;
    }
    Ok(doc)
}

/// Writes one SVG per named plot.
pub fn emit_plots(plots: &[(String, Plot)], out: &Path) -> Outcome<Vec<PathBuf>> {
    plots
        .iter()
        .map(|(name, p)| {
            let path = out.join(format!("{name}.svg"));
            io(p.write(&path), &path)?;
            Ok(path)
        })
        .collect()
}

fn finish(mut doc: ReportDocument, out: &Path) -> Outcome<ReportDocument> {
    doc.finish();
    let path = out.join(format!("{}_report.json", doc.subcommand));
    io(doc.write(&path), &path)?;
    Ok(doc)
}

fn insert(doc: &mut ReportDocument, key: &str, v: &impl Serialize) -> Outcome<()> {
    doc.insert(key, v).step("report")
}

fn build_problem(cfg: &RunConfig, load_abs: bool) -> Outcome<(Domain, WeakProblem)> {
    let domain = cfg.domain().step("config")?;
    let grid = domain.grid(cfg.n).step("config")?;
    let mask = domain.mask(&grid).step("domain mask")?;
    let a = cfg.operator().step("config")?;
    let mut f = cfg.load_spec().step("config")?.sample(&grid, &mask).step("load")?;
    if load_abs {
        f.iter_mut().for_each(|v| *v = v.abs());
    }
    let p = WeakProblem::new(a, f, mask, grid).step("operator")?;
    Ok((domain, p))
}

fn solve_pipeline(cfg: &RunConfig, out: &Path) -> Outcome<(ReportDocument, Vec<f64>)> {
    let mut doc = ReportDocument::new("solve", cfg);
    let (domain, problem) = build_problem(cfg, false)?;
    let (u, rep) = solve_dirichlet(&problem, cfg.tol).step("solve_dirichlet")?;
    doc.check(CheckRecord::new("relative residual within tol", rep.relative_residual, cfg.tol, 0.0));
    doc.check(CheckRecord::new("coercivity constant positive", 0.0, rep.beta_est, 0.0));
    let (st, _) = assemble(&problem).step("assemble")?;
    let poincare = poincare_from_stiffness(&st).step("poincare_constant")?;
    let lm = lax_milgram_from_stiffness(&st, &problem.grid, &poincare, 50, 7).step("lax_milgram_constants")?;
    doc.check(CheckRecord::new("sampled coercivity", 0.0, lm.coercivity_slack, 1e-8));
    doc.check(CheckRecord::new("sampled boundedness", 0.0, lm.boundedness_slack, 1e-8));
    let residual = weak_residual(&u, &problem, None).step("weak_residual")?;
    if let (Domain::Disk { radius }, "identity", Some(v)) = (domain, problem.a.name(), constant_load(cfg)) {
        let centre = problem.grid.nearest(0.0, 0.0).filter(|&k| problem.grid.point(k) == (0.0, 0.0));
        if let Some(c) = centre {
            doc.check(CheckRecord::close("centre value against -f R^2/4", u[c], -v * radius * radius / 4.0, 1e-3));
        }
    }
    insert(&mut doc, "solve", &rep)?;
    insert(&mut doc, "lax_milgram", &lm)?;
    insert(&mut doc, "weak_residual", &residual)?;
    let path = out.join("solution.csv");
    io(write_field_csv(&path, &problem.grid, &problem.mask, &u), &path)?;
    Ok((finish(doc, out)?, u))
}

fn constant_load(cfg: &RunConfig) -> Option<f64> {
    match cfg.load_spec().ok()? {
        crate::config::LoadSpec::Constant(v) => Some(v),
        _ => None,
    }
}

/// Smooth random fields with a little noise, deterministic in the seed.
fn random_fields(grid: &crate::geometry::Grid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (kx, ky) = (rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0));
            let (px, py) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));
            let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
            (0..grid.len())
                .map(|k| {
                    let (x, y) = grid.point(k);
                    amp * ((kx * x + px).sin() * (ky * y + py).cos() + 0.2 * rng.gen_range(-1.0..1.0))
                })
                .collect()
        })
        .collect()
}

fn norms_pipeline(cfg: &RunConfig, out: &Path) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("norms", cfg);
    let domain = cfg.domain().step("config")?;
    let grid = domain.grid(cfg.n).step("config")?;
    let mask = domain.mask(&grid).step("domain mask")?;
    let mu = mask.measure(&grid).step("measure")?;
    let theta = cfg.young().step("config")?;
    let big_phi = square_base(&cfg.young).unwrap_or_else(|| theta.clone());
    let fields: Vec<Vec<f64>> = random_fields(&grid, cfg.norms.fields, cfg.norms.seed)
        .into_iter()
        .map(|f| f.iter().enumerate().map(|(k, v)| if mask.contains(k) { *v } else { 0.0 }).collect())
        .collect();
    let path = out.join("norms.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Numerical { step: "norms.csv".into(), message: e.to_string() })?;
    let header = ["field_id", "luxembourg", "orlicz", "holder_defect", "square_lower", "square_mid", "square_upper"];
    let mut rows = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        let lux = luxembourg_norm(f, &theta, &mu, 1e-10).step("luxembourg_norm")?.value;
        let orl = orlicz_norm_dual(f, &theta, &mu).step("orlicz_norm_dual")?;
        let g = &fields[(i + 1) % fields.len()];
        let hd = holder_defect(f, g, &theta, &mu).step("holder_defect")?;
        let (lo, mid, hi) = square_composition_check(f, &big_phi, &mu).step("square_composition_check")?;
        let rel = 1e-9 * lux.max(1e-300);
        doc.check(CheckRecord::new(format!("field {i}: luxembourg <= orlicz"), lux, orl, rel));
        doc.check(CheckRecord::new(format!("field {i}: orlicz <= 2 luxembourg"), orl, 2.0 * lux, rel));
        doc.check(CheckRecord::new(format!("field {i}: holder defect nonnegative"), 0.0, hd, 1e-9 * hd.abs().max(1.0)));
        doc.check(CheckRecord::new(format!("field {i}: square lower"), lo, mid, 1e-9 * mid));
        doc.check(CheckRecord::new(format!("field {i}: square upper"), mid, hi, 1e-9 * mid));
        rows.push([i as f64, lux, orl, hd, lo, mid, hi]);
    }
    let werr = |e: csv::Error| Failure::Numerical { step: "norms.csv".into(), message: e.to_string() };
    w.write_record(header).map_err(werr)?;
    for r in &rows {
        let mut rec = vec![(r[0] as usize).to_string()];
        rec.extend(r[1..].iter().map(f64::to_string));
        w.write_record(rec).map_err(werr)?;
    }
    w.flush().map_err(|e| Failure::Numerical { step: "norms.csv".into(), message: e.to_string() })?;
    insert(&mut doc, "young", &theta.name())?;
    insert(&mut doc, "square_base", &big_phi.name())?;
    finish(doc, out)
}

/// `Φ` when the spec is `composed_square(Φ)`.
fn square_base(spec: &str) -> Option<YoungFunction> {
    let inner = spec.trim().strip_prefix("composed_square(")?.strip_suffix(')')?;
    crate::young::parse_young(inner).ok()
}

#[derive(Serialize)]
struct SubunitSummary {
    from: [f64; 2],
    to: [f64; 2],
    distance: f64,
    reverse_distance: f64,
    reachable: bool,
    rho: f64,
    ball_nodes: usize,
    ball_extent_x: f64,
    ball_extent_y: f64,
}

fn subunit_pipeline(cfg: &RunConfig, out: &Path) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("subunit", cfg);
    let domain = cfg.domain().step("config")?;
    let grid = domain.grid(cfg.n).step("config")?;
    let mask = domain.mask(&grid).step("domain mask")?;
    let a = cfg.operator().step("config")?;
    a.check_psd(&grid).step("operator")?;
    let s = &cfg.subunit;
    let (p, q) = ((s.from[0], s.from[1]), (s.to[0], s.to[1]));
    let d = subunit_distance(&a, p, q, &grid, Some(&mask)).map_err(|e| Failure::Config(format!("section `subunit`: {e}")))?;
    let back = subunit_distance(&a, q, p, &grid, Some(&mask)).step("subunit_distance")?;
    let reachable = d.is_finite() && back.is_finite();
    doc.check(CheckRecord::flag("reachability is symmetric", d.is_finite() == back.is_finite()));
    if reachable {
        let euclid = (p.0 - q.0).hypot(p.1 - q.1).max(grid.h);
        let rate = (d.max(back) / euclid).max(1.0);
        doc.check(CheckRecord::close("distance symmetric within 2h per unit cost", d, back, 2.0 * grid.h * rate));
    }
    let ball = subunit_ball(&a, p, s.rho, &grid).step("subunit_ball")?;
    let centre = grid.nearest(p.0, p.1).ok_or_else(|| Failure::Config("section `subunit`: start point off the grid".into()))?;
    let (ex, ey) = ball.extents_from(&grid, centre);
    if a.name() == "identity" {
        doc.check(CheckRecord::close("euclidean ball x-extent within one cell", ex as f64 * grid.h, s.rho, grid.h));
        doc.check(CheckRecord::close("euclidean ball y-extent within one cell", ey as f64 * grid.h, s.rho, grid.h));
    }
    let summary = SubunitSummary {
        from: s.from,
        to: s.to,
        distance: d,
        reverse_distance: back,
        reachable,
        rho: s.rho,
        ball_nodes: ball.interior_count(),
        ball_extent_x: ex as f64 * grid.h,
        ball_extent_y: ey as f64 * grid.h,
    };
    insert(&mut doc, "subunit", &summary)?;
    let field = subunit_sweep(&a, centre, &grid, Some(&mask));
    let path = out.join("subunit_distance.csv");
    io(write_field_csv(&path, &grid, &mask, &field), &path)?;
    finish(doc, out)
}

fn degiorgi_pipeline(cfg: &RunConfig, out: &Path, pre: Option<&[f64]>, plots: &mut Vec<(String, Plot)>) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("degiorgi", cfg);
    let (_, problem) = build_problem(cfg, false)?;
    let u = match (pre, &cfg.degiorgi.solution) {
        (Some(u), _) => u.to_vec(),
        (None, Some(path)) => read_field_csv(Path::new(path), &problem.grid, &problem.mask).step("reading solution")?,
        (None, None) => solve_dirichlet(&problem, cfg.tol).step("solve_dirichlet")?.0,
    };
    let phi = cfg.young().step("config")?;
    let d = &cfg.degiorgi;
    let opts = DeGiorgiOptions { tau: d.tau, c: d.c, eps: d.eps, levels: d.levels, k_max: d.k_max, u0_target: d.u0_target };
    let rep = degiorgi_study(&u, &problem, &phi, opts).step("degiorgi_study")?;
    doc.check(CheckRecord::new("caccioppoli defect", 0.0, rep.caccioppoli_defect, rep.tol_disc));
    doc.check(CheckRecord::flag("U_k nonincreasing", rep.monotone));
    for r in &rep.chebyshev {
        doc.check(CheckRecord::new(format!("chebyshev level {}", r.k), r.lhs, r.rhs, 1e-12 * r.rhs));
    }
    doc.check(CheckRecord::flag("recursion constant finite", rep.recursion.c.is_finite()));
    doc.check(CheckRecord::flag(
        "majorant converges from adaptive tau",
        rep.adaptive_majorant.outcome == crate::degiorgi::MajorantOutcome::Converged,
    ));
    let path = out.join("degiorgi_trace.csv");
    io(write_trace_csv(&path, &rep.rows), &path)?;
    plots.push((
        "degiorgi_trace".into(),
        Plot::new("Truncated energies", "k", "U_k", false, true)
            .line("U_k", rep.rows.iter().map(|r| (r.k as f64, r.u_k)).collect())
            .line("majorant", rep.rows.iter().map(|r| (r.k as f64, r.majorant_k)).collect()),
    ));
    insert(&mut doc, "degiorgi", &rep)?;
    finish(doc, out)
}

fn sobolev_pipeline(cfg: &RunConfig, out: &Path, plots: &mut Vec<(String, Plot)>) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("sobolev", cfg);
    let (_, problem) = build_problem(cfg, true)?;
    let phi = cfg.sobolev_young().step("config")?;
    let setting = Setting::from_problem(&problem);
    let mut family = test_family(&problem.mask, &problem.grid);
    if let Some(ids) = &cfg.sobolev.families {
        family.retain(|(id, _)| ids.contains(id));
    }
    let tent = family[0].1.clone();
    let est = match best_constant_search_with(&phi, &setting, family, cfg.sobolev.budget) {
        Err(Error::InequalityFails { lhs }) => {
            return Err(Failure::Numerical {
                step: "orlicz_sobolev_ratio".into(),
                message: format!("inequality fails: lhs {lhs:e} with zero energy"),
            })
        }
        r => r.step("best_constant_search")?,
    };
    doc.check(CheckRecord::flag("finite constant lower bound", est.lower_bound.is_finite()));
    // necessity chain with the |f| load and the first selected test field
    let (u, _) = solve_dirichlet(&problem, cfg.tol).step("solve_dirichlet")?;
    let conj = phi.dual();
    let chain = necessity_chain_check(&u, &tent, &problem, Some(&conj)).step("necessity_chain_check")?;
    for r in &chain.rows {
        doc.check(CheckRecord::new(r.name.clone(), r.lhs, r.rhs, chain.tol_disc));
    }
    let path = out.join("sobolev_ratios.csv");
    io(write_ratio_csv(&path, &est.ratios), &path)?;
    plots.push((
        "sobolev_ratios".into(),
        Plot::new("Orlicz-Sobolev ratios by trial", "trial", "ratio", false, false)
            .line("ratio", est.ratios.iter().enumerate().map(|(i, r)| (i as f64, r.ratio)).collect()),
    ));
    insert(&mut doc, "constant", &est)?;
    insert(&mut doc, "necessity", &chain)?;
    finish(doc, out)
}

fn study_plot(s: &ConvergenceStudy) -> Plot {
    Plot::new(&s.label, "epsilon", "I(epsilon)", true, true).line("I", s.cutoffs.iter().copied().zip(s.integrals.iter().copied()).collect())
}

fn counterexample_pipeline(cfg: &RunConfig, out: &Path, plots: &mut Vec<(String, Plot)>) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("counterexample", cfg);
    let c = &cfg.counterexample;
    let (study, gradient, analytic) = match c.case {
        CaseKind::Laplacian => {
            let r = laplacian_example(c.alpha(), c.q, c.cutoffs).step("laplacian_example")?;
            insert(&mut doc, "laplacian", &r)?;
            (r.study, Some(r.gradient_study), r.expected)
        }
        CaseKind::Finite => {
            let r = finite_vanishing_report(c.m, c.q, c.rho, c.cutoffs).step("finite_vanishing_report")?;
            insert(&mut doc, "finite", &r)?;
            let prof = VanishingProfile::finite(c.m).step("profile")?;
            membership(&mut doc, prof, c.rho, c.cutoffs)?;
            (r.study, Some(r.gradient_study), r.expected)
        }
        CaseKind::Infinite => {
            let r = infinite_vanishing_report(c.alpha(), c.big_m, c.rho, c.cutoffs).step("infinite_vanishing_report")?;
            insert(&mut doc, "infinite", &r)?;
            let prof = VanishingProfile::infinite(c.alpha()).step("profile")?;
            membership(&mut doc, prof, c.rho, c.cutoffs)?;
            (r.study, None, r.expected)
        }
    };
    let expected = c.expect.resolve(analytic);
    let name = format!("study verdict {:?} matches expected {:?}", study.verdict, expected).to_lowercase();
    doc.check(CheckRecord::flag(name, study.verdict == expected));
    insert(&mut doc, "verdict", &study.verdict)?;
    insert(&mut doc, "expected", &expected)?;
    let path = out.join("counterexample_study.csv");
    io(write_study_csv(&path, &study), &path)?;
    plots.push(("counterexample_study".into(), study_plot(&study)));
    if let Some(g) = gradient {
        let path = out.join("counterexample_gradient.csv");
        io(write_study_csv(&path, &g), &path)?;
        plots.push(("counterexample_gradient".into(), study_plot(&g)));
    }
    finish(doc, out)
}

fn membership(doc: &mut ReportDocument, prof: VanishingProfile, rho: f64, halvings: usize) -> Outcome<()> {
    let r = membership_report_w12a(prof, CutoffChi::default(), rho, halvings, 1.0).step("membership_report_w12a")?;
    doc.check(CheckRecord::flag("u has finite weighted energy", r.study.verdict == Verdict::Converges && r.value.is_finite()));
    insert(doc, "membership", &r)
}

fn all_pipeline(cfg: &RunConfig, out: &Path, plots: &mut Vec<(String, Plot)>) -> Outcome<ReportDocument> {
    let mut doc = ReportDocument::new("all", cfg);
    let (solve, u) = solve_pipeline(cfg, out)?;
    let parts = vec![
        solve,
        norms_pipeline(cfg, out)?,
        subunit_pipeline(cfg, out)?,
        degiorgi_pipeline(cfg, out, Some(&u), plots)?,
        sobolev_pipeline(cfg, out, plots)?,
        counterexample_pipeline(cfg, out, plots)?,
    ];
    for p in parts {
        for mut c in p.checks {
            c.name = format!("{}: {}", p.subcommand, c.name);
            doc.check(c);
        }
        insert(&mut doc, &p.subcommand, &p.passed)?;
    }
    finish(doc, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let mut v: Vec<String> = vec!["odlab".into(), "--out".into(), dir.path().to_string_lossy().into_owned(), "--no-plots".into()];
        v.extend(args.iter().map(|s| s.to_string()));
        (main_with_args(v), dir)
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&["solve", "--n", "9"]).0, 2);
        assert_eq!(run_args(&["solve", "--operator", "diag_g(nope(1))"]).0, 2);
        assert_eq!(run_args(&["subunit", "--from", "1"]).0, 2);
        assert_eq!(run_args(&["counterexample", "--case", "laplacian", "--alpha", "0.5"]).0, 2);
    }

    #[test]
    fn empty_config_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "").unwrap();
        assert_eq!(run_args(&["--config", p.to_str().unwrap(), "solve"]).0, 2);
    }

    #[test]
    fn counterexample_expected_divergence_passes() {
        let (code, dir) = run_args(&["counterexample", "--case", "finite", "--m", "1", "--q", "2", "--expect", "diverges"]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(dir.path().join("counterexample_report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["results"]["verdict"], "diverges");
        let csv = std::fs::read_to_string(dir.path().join("counterexample_study.csv")).unwrap();
        assert!(csv.starts_with("epsilon,I\n"));
    }

    #[test]
    fn wrong_expectation_exits_1() {
        let (code, _) = run_args(&["counterexample", "--case", "finite", "--m", "1", "--q", "1", "--expect", "diverges"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn solve_writes_field_and_report() {
        let (code, dir) = run_args(&["solve", "--n", "33"]);
        assert_eq!(code, 0);
        let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert!(csv.starts_with("x,y,u\n"));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve_report.json")).unwrap()).unwrap();
        assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"].as_str().unwrap().starts_with("centre value")));
        assert_eq!(v["passed"], true);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let args =
                ["odlab", "--out", dir.path().to_str().unwrap(), "counterexample", "--case", "laplacian", "--q", "1.2", "--cutoffs", "30"];
            assert_eq!(main_with_args(args), 0);
            dir
        };
        let (a, b) = (run(), run());
        let svgs: Vec<_> =
            std::fs::read_dir(a.path()).unwrap().flatten().filter(|e| e.path().extension().is_some_and(|x| x == "svg")).collect();
        assert_eq!(svgs.len(), 2, "study and gradient study each get a plot");
        for name in ["counterexample_study.svg", "counterexample_gradient.svg", "counterexample_study.csv", "counterexample_gradient.csv"] {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
        }
        let strip = |d: &tempfile::TempDir| {
            let mut v: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(d.path().join("counterexample_report.json")).unwrap()).unwrap();
            let o = v.as_object_mut().unwrap();
            o.remove("started_unix");
            o.remove("finished_unix");
            v
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn point_parser() {
        assert_eq!(parse_point("0.5, -1").unwrap(), [0.5, -1.0]);
        assert!(parse_point("1,2,3").is_err());
    }
}
