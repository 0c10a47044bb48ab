//! Level-set iteration for the sup bound: truncations `u_k = (u − C_k)₊`, their energies
//! `U_k`, Caccioppoli checks, the Chebyshev step and the nonlinear recursion on `U_k`.

use serde::{Deserialize, Serialize};

use crate::dirichlet::{energy, WeakProblem};
use crate::error::{Error, Result};
use crate::orlicz::NormalizedMeasure;
use crate::young::{inverse_young, YoungFunction};

/// `C_k = τ f_sup (1 − c (k+1)^{−ε/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub tau: f64,
    pub c: f64,
    pub eps: f64,
    pub f_sup: f64,
}

impl TruncationSchedule {
    pub fn new(tau: f64, c: f64, eps: f64, f_sup: f64) -> Result<Self> {
        if !(tau >= 1.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be >= 1, got {tau}")));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::invalid(format!("c must lie in (0, 1), got {c}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if !(f_sup >= 0.0) || !f_sup.is_finite() {
            return Err(Error::invalid(format!("f_sup must be finite and nonnegative, got {f_sup}")));
        }
        Ok(Self { tau, c, eps, f_sup })
    }

    /// Defaults `c = 1/2`, `ε = 1`.
    pub fn standard(tau: f64, f_sup: f64) -> Result<Self> {
        Self::new(tau, 0.5, 1.0, f_sup)
    }

    pub fn level(&self, k: usize) -> f64 {
        truncation_level(k, self)
    }

    /// Right side of the Chebyshev step at level `k`, per unit `U_k`.
    pub fn chebyshev_factor(&self, k: usize) -> f64 {
        let d = self.c * self.tau * self.f_sup * self.eps;
        if d == 0.0 {
            return f64::INFINITY;
        }
        4.0 / (d * d) * ((k + 2) as f64).powf(2.0 + self.eps)
    }
}

pub fn truncation_level(k: usize, sched: &TruncationSchedule) -> f64 {
    sched.tau * sched.f_sup * (1.0 - sched.c * ((k + 1) as f64).powf(-0.5 * sched.eps))
}

/// `U = ∫ (u − level)₊² dμ`.
pub fn truncated_energy(u: &[f64], level: f64, mu: &NormalizedMeasure) -> f64 {
    mu.integrate_map(u, |v| {
        let p = (v - level).max(0.0);
        p * p
    })
}

fn positive_part(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v.max(0.0)).collect()
}

/// `‖f‖_∞` over the masked nodes.
pub fn load_sup(problem: &WeakProblem) -> f64 {
    (0..problem.grid.len()).filter(|&k| problem.mask.contains(k)).map(|k| problem.f[k].abs()).fold(0.0, f64::max)
}

/// Discretization slack `10 h (‖f‖_∞ + ‖u‖_∞)`.
pub fn tol_disc(h: f64, f_sup: f64, u_sup: f64) -> f64 {
    10.0 * h * (f_sup + u_sup)
}

pub fn field_sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `∫ u₊ ‖f‖_∞ dμ − ∫ |∇_A u₊|² dμ`.
pub fn caccioppoli_defect(u: &[f64], problem: &WeakProblem) -> f64 {
    let up = positive_part(u);
    if up.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    load_sup(problem) * problem.mu.integrate(&up) - energy(&up, &problem.a, &problem.mask, &problem.grid)
}

/// `P ∫ u₊ v dμ − ∫ |∇_A u₊|² dμ`, after checking `‖f‖_∞ ≤ P v` on `{u > 0}`.
pub fn modified_caccioppoli_check(u: &[f64], v: &[f64], p: f64, problem: &WeakProblem) -> Result<f64> {
    let f_sup = load_sup(problem);
    if let Some(k) = (0..u.len()).find(|&k| problem.mask.contains(k) && u[k] > 0.0 && f_sup > p * v[k] * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("‖f‖∞ ≤ P·v fails at node {k} (v = {}, P = {p})", v[k])));
    }
    let up = positive_part(u);
    if up.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let prod: Vec<f64> = up.iter().zip(v).map(|(a, b)| a * b).collect();
    Ok(p * problem.mu.integrate(&prod) - energy(&up, &problem.a, &problem.mask, &problem.grid))
}

/// `Γ(t) = 1/Φ̃⁻¹(1/t)` for the conjugate `Φ̃`.
pub fn gamma_of(phi_conj: &YoungFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("gamma_of needs t > 0, got {t}")));
    }
    Ok(1.0 / inverse_young(phi_conj, 1.0 / t, 1e-13)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevRow {
    pub k: usize,
    /// `μ({u > C_{k+1}})`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `μ({u_{k+1} > 0}) ≤ 4/(c²τ²‖f‖²ε²) (k+2)^{2+ε} U_k` for `k = 0..levels`.
pub fn chebyshev_bound_check(u: &[f64], sched: &TruncationSchedule, mu: &NormalizedMeasure, levels: usize) -> Vec<ChebyshevRow> {
    (0..levels)
        .map(|k| {
            let uk = truncated_energy(u, sched.level(k), mu);
            let next = sched.level(k + 1);
            let lhs = mu.measure_where(u, |v| v > next);
            let rhs = if uk == 0.0 { 0.0 } else { sched.chebyshev_factor(k) * uk };
            ChebyshevRow { k, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) }
        })
        .collect()
}

/// Right side of the recursion: `C (k+2)^{(2+ε)/2} U Γ(C (k+2)^{2+ε} U)`.
pub fn recursion_rhs(c: f64, k: usize, u: f64, eps: f64, phi_conj: &YoungFunction) -> Result<f64> {
    if u == 0.0 || c == 0.0 {
        return Ok(0.0);
    }
    let kk = (k + 2) as f64;
    let arg = c * kk.powf(2.0 + eps) * u;
    if !arg.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(c * kk.powf(0.5 * (2.0 + eps)) * u * gamma_of(phi_conj, arg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    /// Smallest constant making every recorded step hold.
    pub c: f64,
    /// Per step `k`: `rhs_k(C) − U_{k+1}`.
    pub slack: Vec<f64>,
    /// Number of steps used; shorter than the trace when `U_k` reaches 0.
    pub fitted_steps: usize,
    pub reached_zero: bool,
}

/// Smallest `C` with `U_{k+1} ≤ rhs_k(C)` for every recorded `k`.
pub fn verify_recursion(trace: &[f64], phi: &YoungFunction, eps: f64) -> Result<RecursionReport> {
    if trace.len() < 3 {
        return Err(Error::invalid("recursion fit needs at least 3 levels"));
    }
    let phi_conj = phi.dual();
    let zero_from = trace.iter().position(|v| *v == 0.0);
    let steps = match zero_from {
        Some(0) => 0,
        // the step into the first zero holds for any C
        Some(z) => z,
        None => trace.len() - 1,
    };
    let mut c_fit: f64 = 0.0;
    for k in 0..steps {
        let (uk, next) = (trace[k], trace[k + 1]);
        if next == 0.0 {
            continue;
        }
        // rhs is increasing in C; bisect on ln C
        let holds = |c: f64| -> Result<bool> { Ok(recursion_rhs(c, k, uk, eps, &phi_conj)? >= next) };
        let (mut lo, mut hi) = (-700.0_f64, 700.0_f64);
        if !holds(hi.exp())? {
            return Err(Error::Inconsistency(format!("no finite recursion constant at step {k}")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if holds(mid.exp())? {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        c_fit = c_fit.max(hi.exp());
    }
    let slack =
        (0..trace.len() - 1).map(|k| Ok(recursion_rhs(c_fit, k, trace[k], eps, &phi_conj)? - trace[k + 1])).collect::<Result<Vec<_>>>()?;
    Ok(RecursionReport { c: c_fit, slack, fitted_steps: steps, reached_zero: zero_from.is_some() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorantOutcome {
    Converged,
    Diverged,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantRun {
    pub values: Vec<f64>,
    pub outcome: MajorantOutcome,
    /// First index with value below [`MAJORANT_FLOOR`], when converged.
    pub steps: Option<usize>,
}

pub const MAJORANT_FLOOR: f64 = 1e-12;
const MAJORANT_CEILING: f64 = 1e300;

/// Iterates `V_{k+1} = C (k+2)^{(2+ε)/2} V_k Γ(C (k+2)^{2+ε} V_k)` from `V_0 = u0`.
///
/// Converged once `V_k < 1e-12`; diverged on overflow or when the last steps grow.
pub fn run_majorant(u0: f64, c: f64, eps: f64, phi: &YoungFunction, k_max: usize) -> Result<MajorantRun> {
    if !(u0 >= 0.0) || !(c >= 0.0) {
        return Err(Error::invalid("majorant needs U0 >= 0 and C >= 0"));
    }
    let phi_conj = phi.dual();
    let mut values = vec![u0];
    let mut steps = (u0 < MAJORANT_FLOOR).then_some(0);
    let mut v = u0;
    for k in 0..k_max {
        v = recursion_rhs(c, k, v, eps, &phi_conj)?;
        values.push(v);
        if !v.is_finite() || v > MAJORANT_CEILING {
            return Ok(MajorantRun { values, outcome: MajorantOutcome::Diverged, steps: None });
        }
        if steps.is_none() && v < MAJORANT_FLOOR {
            steps = Some(k + 1);
        }
    }
    let outcome = if steps.is_some() {
        MajorantOutcome::Converged
    } else {
        let n = values.len();
        if n >= 3 && values[n - 1] > values[n - 2] && values[n - 2] > values[n - 3] {
            MajorantOutcome::Diverged
        } else {
            MajorantOutcome::Undecided
        }
    };
    Ok(MajorantRun { values, outcome, steps })
}

/// Smallest `τ = 2^j ≥ 1` with `U_0 ≤ target`.
pub fn adaptive_tau(u: &[f64], f_sup: f64, c: f64, eps: f64, mu: &NormalizedMeasure, target: f64) -> Result<f64> {
    let mut tau = 1.0;
    for _ in 0..64 {
        let s = TruncationSchedule::new(tau, c, eps, f_sup)?;
        if truncated_energy(u, s.level(0), mu) <= target {
            return Ok(tau);
        }
        tau *= 2.0;
    }
    Err(Error::invalid(format!("no tau up to 2^63 brings U_0 below {target}")))
}

/// `U_k` for `k = 0..=levels`.
pub fn energy_trace(u: &[f64], sched: &TruncationSchedule, mu: &NormalizedMeasure, levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| truncated_energy(u, sched.level(k), mu)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub c_k: f64,
    pub u_k: f64,
    pub majorant_k: f64,
    /// `majorant_k − U_k`; the fitted majorant dominates the trace.
    pub slack_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeGiorgiOptions {
    pub tau: f64,
    pub c: f64,
    pub eps: f64,
    pub levels: usize,
    pub k_max: usize,
    pub u0_target: f64,
}

impl Default for DeGiorgiOptions {
    fn default() -> Self {
        Self { tau: 1.0, c: 0.5, eps: 1.0, levels: 20, k_max: 100, u0_target: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiReport {
    pub schedule: TruncationSchedule,
    pub u_sup: f64,
    pub tol_disc: f64,
    pub caccioppoli_defect: f64,
    pub monotone: bool,
    pub chebyshev: Vec<ChebyshevRow>,
    pub recursion: RecursionReport,
    pub rows: Vec<TraceRow>,
    pub adaptive_tau: f64,
    pub adaptive_u0: f64,
    pub adaptive_majorant: MajorantRun,
}

impl DeGiorgiReport {
    pub fn passed(&self) -> bool {
        self.caccioppoli_defect >= -self.tol_disc
            && self.monotone
            && self.chebyshev.iter().all(|r| r.holds)
            && self.recursion.c.is_finite()
            && self.adaptive_majorant.outcome == MajorantOutcome::Converged
    }
}

/// Full level-set study of a computed solution `u` of `problem`, with the bump `phi`.
pub fn degiorgi_study(u: &[f64], problem: &WeakProblem, phi: &YoungFunction, opts: DeGiorgiOptions) -> Result<DeGiorgiReport> {
    let f_sup = load_sup(problem);
    let u_sup = field_sup(u);
    let schedule = TruncationSchedule::new(opts.tau, opts.c, opts.eps, f_sup)?;
    let trace = energy_trace(u, &schedule, &problem.mu, opts.levels);
    let monotone = trace.windows(2).all(|w| w[1] <= w[0]);
    let chebyshev = chebyshev_bound_check(u, &schedule, &problem.mu, opts.levels);
    let recursion = verify_recursion(&trace, phi, opts.eps)?;
    let own = run_majorant(trace[0], recursion.c, opts.eps, phi, opts.levels)?;
    let rows = trace
        .iter()
        .enumerate()
        .map(|(k, &uk)| {
            let m = own.values.get(k).copied().unwrap_or(f64::INFINITY);
            TraceRow { k, c_k: schedule.level(k), u_k: uk, majorant_k: m, slack_k: m - uk }
        })
        .collect();
    let tau = adaptive_tau(u, f_sup, opts.c, opts.eps, &problem.mu, opts.u0_target)?;
    let adaptive_u0 = truncated_energy(u, TruncationSchedule::new(tau, opts.c, opts.eps, f_sup)?.level(0), &problem.mu);
    let adaptive_majorant = run_majorant(adaptive_u0, recursion.c, opts.eps, phi, opts.k_max)?;
    Ok(DeGiorgiReport {
        schedule,
        u_sup,
        tol_disc: tol_disc(problem.grid.h, f_sup, u_sup),
        caccioppoli_defect: caccioppoli_defect(u, problem),
        monotone,
        chebyshev,
        recursion,
        rows,
        adaptive_tau: tau,
        adaptive_u0,
        adaptive_majorant,
    })
}
