//! Explicit unbounded-solution constructions and their integrability thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{geometric_breaks, integrate, integrate_log_abs, log_add};

const REL_TOL: f64 = 1e-10;

/// Even plateau cutoff: 1 on `[-1, 1]`, 0 outside `[-2, 2]`, smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    degree: u32,
}

impl Default for CutoffChi {
    fn default() -> Self {
        Self { degree: 5 }
    }
}

/// Smoothstep polynomials of odd degree 3, 5, 7 (C¹, C², C³ joins).
pub fn build_chi(degree: u32) -> Result<CutoffChi> {
    match degree {
        3 | 5 | 7 => Ok(CutoffChi { degree }),
        _ => Err(Error::invalid(format!("cutoff degree must be 3, 5 or 7, got {degree}"))),
    }
}

impl CutoffChi {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Rising smoothstep `S(z)` on `[0,1]` with derivatives.
    fn step(&self, z: f64) -> (f64, f64, f64) {
        let z2 = z * z;
        match self.degree {
            3 => (z2 * (3.0 - 2.0 * z), 6.0 * z * (1.0 - z), 6.0 - 12.0 * z),
            5 => (z2 * z * (10.0 - 15.0 * z + 6.0 * z2), 30.0 * z2 * (1.0 - z) * (1.0 - z), 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z)),
            _ => (
                z2 * z2 * (35.0 - 84.0 * z + 70.0 * z2 - 20.0 * z2 * z),
                140.0 * z2 * z * (1.0 - z).powi(3),
                420.0 * z2 * (1.0 - z).powi(2) * (1.0 - 2.0 * z),
            ),
        }
    }

    /// `(χ, χ', χ'')` at `s`.
    pub fn eval3(&self, s: f64) -> (f64, f64, f64) {
        let a = s.abs();
        if a <= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        if a >= 2.0 {
            return (0.0, 0.0, 0.0);
        }
        let (v, d1, d2) = self.step(a - 1.0);
        let sign = s.signum();
        (1.0 - v, -d1 * sign, -d2)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval3(s).0
    }
}

/// Coefficient profile `ψ` with `g = ψ'`; degenerate field `A = diag(1, g²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VanishingProfile {
    /// `ψ = x^{m+1}/(m+1)`.
    Finite { m: f64 },
    /// `ψ = x^{α+1} e^{-1/x^α}`.
    Infinite { alpha: f64 },
}

impl VanishingProfile {
    pub fn finite(m: f64) -> Result<Self> {
        if !(m >= 1.0) {
            return Err(Error::invalid(format!("finite profile needs m >= 1, got {m}")));
        }
        Ok(Self::Finite { m })
    }

    pub fn infinite(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("infinite profile needs alpha > 0, got {alpha}")));
        }
        Ok(Self::Infinite { alpha })
    }

    /// `ln ψ(x)` for `x > 0`.
    pub fn ln_psi(&self, x: f64) -> f64 {
        match *self {
            Self::Finite { m } => (m + 1.0) * x.ln() - (m + 1.0).ln(),
            Self::Infinite { alpha } => (alpha + 1.0) * x.ln() - x.powf(-alpha),
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == 0.0 {
            0.0
        } else {
            self.ln_psi(x).exp()
        }
    }

    /// `ψ'/ψ`.
    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Self::Finite { m } => (m + 1.0) / x,
            Self::Infinite { alpha } => (alpha + 1.0) / x + alpha * x.powf(-alpha - 1.0),
        }
    }

    /// `ψ''/ψ`.
    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Self::Finite { m } => m * (m + 1.0) / (x * x),
            Self::Infinite { alpha } => {
                let a = self.d1(x);
                a * a - (alpha + 1.0) / (x * x) - alpha * (alpha + 1.0) * x.powf(-alpha - 2.0)
            }
        }
    }

    /// `g = ψ'` (zero at the origin, even in `x`).
    pub fn g(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Finite { m } => x.powf(m),
            Self::Infinite { .. } => self.psi(x) * self.d1(x),
        }
    }

    pub fn psi2(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == 0.0 {
            0.0
        } else {
            self.psi(x) * self.d2(x)
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Finite { m } => format!("finite(m={m})"),
            Self::Infinite { alpha } => format!("infinite(alpha={alpha})"),
        }
    }
}

/// Point values of `u = χ(y/ψ(x)) ln(1/x)`, its derivatives and `f = u_xx + g² u_yy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldValues {
    pub u: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub u_xx: f64,
    pub u_yy: f64,
    pub f: f64,
}

/// Closed-form evaluators of the degenerate construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateConstruction {
    pub profile: VanishingProfile,
    pub chi: CutoffChi,
}

pub fn degenerate_u_and_f(profile: VanishingProfile, chi: CutoffChi) -> DegenerateConstruction {
    DegenerateConstruction { profile, chi }
}

impl DegenerateConstruction {
    pub fn eval(&self, x: f64, y: f64) -> Result<FieldValues> {
        if !(x > 0.0) {
            return Err(Error::SingularPoint { x });
        }
        let p = &self.profile;
        let ln_psi = p.ln_psi(x);
        let l = -x.ln();
        // |y| > 2ψ means t outside the support of χ; avoids dividing by an underflowed ψ
        if y.abs().ln() > ln_psi + 2f64.ln() {
            return Ok(FieldValues { u: 0.0, u_x: 0.0, u_y: 0.0, u_xx: 0.0, u_yy: 0.0, f: 0.0 });
        }
        let psi = ln_psi.exp();
        let t = y / psi;
        let (c0, c1, c2) = self.chi.eval3(t);
        let (d1, d2) = (p.d1(x), p.d2(x));
        let u = c0 * l;
        let u_y = c1 * l / psi;
        let u_yy = c2 * l / (psi * psi);
        let u_x = -c1 * t * d1 * l - c0 / x;
        let u_xx = c2 * (t * d1).powi(2) * l + c1 * t * (2.0 * d1 * d1 - d2) * l + 2.0 / x * c1 * t * d1 + c0 / (x * x);
        // g²u_yy = (ψ'/ψ)² χ'' ln(1/x)
        let f = u_xx + d1 * d1 * c2 * l;
        Ok(FieldValues { u, u_x, u_y, u_xx, u_yy, f })
    }

    /// Reduced magnitude `1/x² + L|ψ''|/ψ + L(ψ'/ψ)² + (ψ'/ψ)/x`, `L = ln(1/x)`.
    pub fn reduced_estimate(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::SingularPoint { x });
        }
        let p = &self.profile;
        let l = -x.ln();
        Ok(1.0 / (x * x) + l * p.d2(x).abs() + l * p.d1(x).powi(2) + p.d1(x) / x)
    }

    /// Mean of `|f(x, ·)|` over the support `|y| ≤ 2ψ(x)`.
    pub fn mean_abs_f(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::SingularPoint { x });
        }
        let psi = self.profile.psi(x);
        let mut acc = 0.0;
        for (a, b) in [(-2.0, -1.0), (-1.0, 1.0), (1.0, 2.0)] {
            acc += integrate(|t| self.eval(x, t * psi).map(|v| v.f.abs()).unwrap_or(0.0), a, b, 0.0, 1e-10);
        }
        Ok(acc / 4.0)
    }

    /// `u` on the curve `y = ψ(x)`, which equals `ln(1/x)`.
    pub fn on_curve(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::SingularPoint { x });
        }
        let psi = self.profile.psi(x);
        Ok(self.eval(x, psi)?.u)
    }

    pub fn support_contains(&self, x: f64, y: f64) -> bool {
        x > 0.0 && y.abs() <= 2.0 * self.profile.psi(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// `I(ε) = ∫_ε^ρ` over halving cutoffs, with the verdict and the log-log growth rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub label: String,
    pub cutoffs: Vec<f64>,
    pub integrals: Vec<f64>,
    pub log_integrals: Vec<f64>,
    /// Slope of `ln I` against `ln(1/ε)` over the last five cutoffs.
    pub slope: f64,
    pub verdict: Verdict,
}

/// Relative increments below 1% over the last two halvings mean convergence; above 10% each, divergence.
pub const CONVERGE_REL: f64 = 0.01;
pub const DIVERGE_REL: f64 = 0.10;

impl ConvergenceStudy {
    /// Builds a study from `ln I` at each cutoff.
    pub fn from_logs(label: &str, cutoffs: Vec<f64>, log_integrals: Vec<f64>) -> Result<Self> {
        if cutoffs.len() != log_integrals.len() || cutoffs.len() < 3 {
            return Err(Error::invalid("a convergence study needs at least three cutoffs"));
        }
        if cutoffs.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("cutoffs must be strictly decreasing"));
        }
        let integrals: Vec<f64> = log_integrals.iter().map(|l| l.exp()).collect();
        let k = log_integrals.len();
        // ln(I_{i+1}/I_i) for the last two pairs
        let incr: Vec<f64> = (k - 2..k).map(|i| log_integrals[i] - log_integrals[i - 1]).collect();
        let zero = log_integrals[k - 1] == f64::NEG_INFINITY;
        let verdict = if zero || incr.iter().all(|d| d.exp_m1().abs() < CONVERGE_REL) {
            Verdict::Converges
        } else if incr.iter().all(|d| d.exp_m1() > DIVERGE_REL) {
            Verdict::Diverges
        } else {
            Verdict::Inconclusive
        };
        let tail = k.saturating_sub(5);
        let xs: Vec<f64> = cutoffs[tail..].iter().map(|e| -e.ln()).collect();
        let ys = &log_integrals[tail..];
        let slope = if ys.iter().all(|v| v.is_finite()) { fit_slope(&xs, ys) } else { 0.0 };
        Ok(Self { label: label.to_string(), cutoffs, integrals, log_integrals, slope, verdict })
    }

    pub fn last(&self) -> f64 {
        *self.integrals.last().unwrap_or(&0.0)
    }
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Cutoffs `ρ 2^{-i}`, `i = 1..=halvings`.
pub fn halving_cutoffs(rho: f64, halvings: usize) -> Vec<f64> {
    (1..=halvings).map(|i| rho * 0.5f64.powi(i as i32)).collect()
}

/// Study of `∫_ε^ρ F(x) dx` where the integrand is supplied as `ln F` in the variable `s = ln(1/x)`
/// (the Jacobian `x = e^{-s}` must already be included).
fn study_log_variable(label: &str, rho: f64, halvings: usize, log_integrand_s: impl Fn(f64) -> f64) -> Result<ConvergenceStudy> {
    let cutoffs = halving_cutoffs(rho, halvings);
    let mut acc = f64::NEG_INFINITY;
    let mut prev = -rho.ln();
    let mut logs = Vec::with_capacity(cutoffs.len());
    for &e in &cutoffs {
        let s = -e.ln();
        acc = log_add(acc, integrate_log_abs(&log_integrand_s, prev, s, &[], REL_TOL, acc + REL_TOL.ln()));
        prev = s;
        logs.push(acc);
    }
    ConvergenceStudy::from_logs(label, cutoffs, logs)
}

/// Laplacian log-power example on `B(0, 1/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianReport {
    pub alpha: f64,
    pub q: f64,
    /// `∫|f|^q` reduced to `∫_ε^{1/2} (ln 1/r)^{q(α-2)} r^{1-2q} dr`.
    pub study: ConvergenceStudy,
    /// `∫|∇u|²` over `B(0, 1/2)` outside `B(0, ε)`.
    pub gradient_study: ConvergenceStudy,
    /// Closed form `2πα²(ln 2)^{2α-1}/(1-2α)` of the full gradient integral.
    pub gradient_exact: f64,
    /// Finite iff `q < 1`, or `q = 1` and `α < 1`.
    pub expected: Verdict,
}

/// `u = (ln 1/r)^α`.
pub fn laplacian_u(alpha: f64, r: f64) -> f64 {
    (-r.ln()).powf(alpha)
}

/// `f = Δu = α(α-1) r^{-2} (ln 1/r)^{α-2}`.
pub fn laplacian_f(alpha: f64, r: f64) -> f64 {
    alpha * (alpha - 1.0) / (r * r) * (-r.ln()).powf(alpha - 2.0)
}

pub fn laplacian_example(alpha: f64, q: f64, halvings: usize) -> Result<LaplacianReport> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    if !(q > 0.0) {
        return Err(Error::invalid(format!("q must be positive, got {q}")));
    }
    // r = e^{-s}: integrand s^{q(α-2)} e^{(2q-2)s}
    let study =
        study_log_variable(&format!("laplacian alpha={alpha} q={q}"), 0.5, halvings, |s| q * (alpha - 2.0) * s.ln() + (2.0 * q - 2.0) * s)?;
    // |∇u|² r dr dθ = α² s^{2α-2} e^{0}·2π ds
    let gradient_study = study_log_variable(&format!("laplacian gradient alpha={alpha}"), 0.5, halvings, |s| {
        (2.0 * std::f64::consts::PI * alpha * alpha).ln() + (2.0 * alpha - 2.0) * s.ln()
    })?;
    let gradient_exact = 2.0 * std::f64::consts::PI * alpha * alpha * 2f64.ln().powf(2.0 * alpha - 1.0) / (1.0 - 2.0 * alpha);
    let expected = if q < 1.0 || (q == 1.0 && alpha < 1.0) { Verdict::Converges } else { Verdict::Diverges };
    Ok(LaplacianReport { alpha, q, study, gradient_study, gradient_exact, expected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteReport {
    pub m: f64,
    pub q: f64,
    pub rho: f64,
    /// `∫_ε^ρ x^{m+1-2q} (ln 1/x)^q dx`.
    pub study: ConvergenceStudy,
    /// `∫_ε^ρ x^{m-1} (ln 1/x)² dx`.
    pub gradient_study: ConvergenceStudy,
    /// `(m + 2)/2`.
    pub threshold: f64,
    pub expected: Verdict,
}

pub fn finite_vanishing_report(m: f64, q: f64, rho: f64, halvings: usize) -> Result<FiniteReport> {
    VanishingProfile::finite(m)?;
    if !(q > 0.0) {
        return Err(Error::invalid(format!("q must be positive, got {q}")));
    }
    check_rho(rho)?;
    // x = e^{-s}, dx = e^{-s} ds
    let study = study_log_variable(&format!("finite m={m} q={q}"), rho, halvings, |s| -(m + 2.0 - 2.0 * q) * s + q * s.ln())?;
    let gradient_study = study_log_variable(&format!("finite gradient m={m}"), rho, halvings, |s| -m * s + 2.0 * s.ln())?;
    let threshold = 0.5 * (m + 2.0);
    let expected = if q < threshold { Verdict::Converges } else { Verdict::Diverges };
    Ok(FiniteReport { m, q, rho, study, gradient_study, threshold, expected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteReport {
    pub alpha: f64,
    pub big_m: f64,
    pub rho: f64,
    /// `∫_ε^ρ θ(f̂(x)) ψ(x) dx` with `θ(s) = M s^{1-1/M} e^{s^{1/M}}`, `f̂ = x^{-(2α+2)} ln(1/x)`.
    pub study: ConvergenceStudy,
    /// `2 + 2/α`.
    pub threshold: f64,
    pub expected: Verdict,
    /// `2 + 2/α > 2 + 2N` for every sampled `N ≥ 1` with `αN < 1`.
    pub exceeds_bump_bound: bool,
}

/// `ln θ(v)` for the conjugate-bump bound `θ(v) = M v^{1-1/M} e^{v^{1/M}}`, given `ln v`.
fn ln_theta_bound(big_m: f64, ln_v: f64) -> f64 {
    big_m.ln() + (1.0 - 1.0 / big_m) * ln_v + (ln_v / big_m).exp()
}

pub fn infinite_vanishing_report(alpha: f64, big_m: f64, rho: f64, halvings: usize) -> Result<InfiniteReport> {
    let profile = VanishingProfile::infinite(alpha)?;
    if !(big_m >= 1.0) {
        return Err(Error::invalid(format!("M must be at least 1, got {big_m}")));
    }
    check_rho(rho)?;
    // s = x^{-α}: x = s^{-1/α}, dx = (1/α) s^{-1/α-1} ds
    let log_integrand = move |s: f64| {
        let ln_x = -s.ln() / alpha;
        let ln_fhat = -(2.0 * alpha + 2.0) * ln_x + (-ln_x).ln();
        ln_theta_bound(big_m, ln_fhat) + profile.ln_psi_from_ln_x(ln_x, s) - alpha.ln() + (-1.0 / alpha - 1.0) * s.ln()
    };
    let cutoffs = halving_cutoffs(rho, halvings);
    let mut acc = f64::NEG_INFINITY;
    let mut prev = rho.powf(-alpha);
    let mut logs = Vec::with_capacity(cutoffs.len());
    for &e in &cutoffs {
        let s = e.powf(-alpha);
        acc = log_add(acc, integrate_log_abs(log_integrand, prev, s, &geometric_breaks(prev, s), REL_TOL, acc + REL_TOL.ln()));
        prev = s;
        logs.push(acc);
    }
    let study = ConvergenceStudy::from_logs(&format!("infinite alpha={alpha} M={big_m}"), cutoffs, logs)?;
    let threshold = 2.0 + 2.0 / alpha;
    let expected = if (2.0 * alpha + 2.0) / big_m < alpha { Verdict::Converges } else { Verdict::Diverges };
    let exceeds_bump_bound = (0..=64)
        .map(|j| 1.0 + j as f64 / 64.0 * (1.0 / alpha - 1.0))
        .filter(|&n| n >= 1.0 && alpha * n < 1.0)
        .all(|n| threshold > 2.0 + 2.0 * n);
    Ok(InfiniteReport { alpha, big_m, rho, study, threshold, expected, exceeds_bump_bound })
}

impl VanishingProfile {
    /// `ln ψ` given `ln x` and, for the infinite profile, `s = x^{-α}`.
    fn ln_psi_from_ln_x(&self, ln_x: f64, s: f64) -> f64 {
        match *self {
            Self::Finite { m } => (m + 1.0) * ln_x - (m + 1.0).ln(),
            Self::Infinite { alpha } => (alpha + 1.0) * ln_x - s,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

/// `∫∫ |u_x|² + g²|u_y|²` over the support of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub profile: String,
    pub rho: f64,
    /// Two-dimensional quadrature, cutoff-refined in `x`.
    pub study: ConvergenceStudy,
    /// Value at the finest cutoff.
    pub value: f64,
    /// One-dimensional reduction through the moments of `χ`.
    pub reduced: f64,
    /// `value / ∫_ε^ρ x^{-2} (ln 1/x)² ψ(x) dx`.
    pub band_ratio: f64,
}

pub fn membership_report_w12a(
    profile: VanishingProfile,
    chi: CutoffChi,
    rho: f64,
    halvings: usize,
    scale: f64,
) -> Result<MembershipReport> {
    check_rho(rho)?;
    // y = ψ t: the inner integral is ψ(x) ∫ (u_x² + (ψ'/ψ)² χ'² L²) dt, all in ratios of ψ
    let inner = |x: f64| -> f64 {
        let l = -x.ln();
        let d1 = profile.d1(x);
        let dens = |t: f64| {
            let (c0, c1, _) = chi.eval3(t);
            let ux = -c1 * t * d1 * l - c0 / x;
            ux * ux + (d1 * c1 * l).powi(2)
        };
        [(-2.0, -1.0), (-1.0, 1.0), (1.0, 2.0)].iter().map(|&(a, b)| integrate(dens, a, b, 0.0, 1e-12)).sum()
    };
    let ln_scale2 = 2.0 * scale.abs().ln();
    let label = format!("membership {}", profile.name());
    // s = ln(1/x): dx = x ds
    let study = study_log_variable(&label, rho, halvings, |s| {
        let x = (-s).exp();
        ln_scale2 + inner(x).ln() + profile.ln_psi(x) - s
    })?;
    let m = chi_moments(chi);
    let reduced_study = study_log_variable(&label, rho, halvings, |s| {
        let x = (-s).exp();
        let d1 = profile.d1(x);
        let v = d1 * d1 * s * s * (m[0] + m[3]) + 2.0 * d1 * s * m[1] / x + m[2] / (x * x);
        ln_scale2 + v.ln() + profile.ln_psi(x) - s
    })?;
    let band = study_log_variable(&label, rho, halvings, |s| {
        let x = (-s).exp();
        2.0 * s + 2.0 * s.ln() + profile.ln_psi(x) - s
    })?;
    let value = study.last();
    let band_ratio = if value == 0.0 { 0.0 } else { value / band.last() };
    Ok(MembershipReport { profile: profile.name(), rho, value, reduced: reduced_study.last(), band_ratio, study })
}

/// `[∫χ'²t², ∫χχ't, ∫χ², ∫χ'²]` over `[-2, 2]`.
fn chi_moments(chi: CutoffChi) -> [f64; 4] {
    let mom = |f: &dyn Fn(f64) -> f64| -> f64 {
        [(-2.0, -1.0), (-1.0, 1.0), (1.0, 2.0)].iter().map(|&(a, b)| integrate(f, a, b, 0.0, 1e-13)).sum()
    };
    [
        mom(&|t| chi.eval3(t).1.powi(2) * t * t),
        mom(&|t| {
            let (c0, c1, _) = chi.eval3(t);
            c0 * c1 * t
        }),
        mom(&|t| chi.eval(t).powi(2)),
        mom(&|t| chi.eval3(t).1.powi(2)),
    ]
}
