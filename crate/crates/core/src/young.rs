//! Young functions and their convex conjugates.
//!
//! A [`YoungFunction`] is evaluated on `[0, ∞)` and extended evenly to the
//! whole line. The value `f64::INFINITY` is the extended-real sentinel: a
//! function that jumps to `+∞` (an indicator) simply returns it, and every
//! modular that meets an infinite summand is infinite.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Parameters of the bump family `Φ_N`.
///
/// `Φ_N(t) = (ln E)^N t` on `[0, E]` and `t (ln t)^N` beyond, with `E = e^{2N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFamilyParams {
    n: f64,
    e: f64,
}

impl BumpFamilyParams {
    pub fn new(n: f64) -> Result<Self> {
        // N = 1 is admitted: it is the boundary member used by the norm
        // comparisons and by the inversion checks.
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::invalid(format!("bump exponent N must be >= 1, got {n}")));
        }
        Ok(Self { n, e: (2.0 * n).exp() })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// The switch point `E_N = exp(2N)`.
    pub fn switch_point(&self) -> f64 {
        self.e
    }

    /// Slope of the linear branch, `(ln E)^N`.
    pub fn linear_slope(&self) -> f64 {
        self.e.ln().powf(self.n)
    }

    /// Right derivative at `E`: `(ln E)^N + N (ln E)^{N-1}`.
    fn right_slope_at_switch(&self) -> f64 {
        let l = self.e.ln();
        l.powf(self.n) + self.n * l.powf(self.n - 1.0)
    }

    fn eval(&self, t: f64) -> f64 {
        if t >= self.e {
            t * t.ln().powf(self.n)
        } else {
            self.linear_slope() * t
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        if t >= self.e {
            let l = t.ln();
            l.powf(self.n) + self.n * l.powf(self.n - 1.0)
        } else {
            self.linear_slope()
        }
    }

    /// `ln t` at which the smooth branch has slope `s` (requires `s` above
    /// the right slope at the switch point). Newton from the right on the
    /// convex increasing map `L ↦ L^N + N L^{N-1}`.
    fn log_argmax(&self, s: f64) -> f64 {
        let n = self.n;
        let h = |l: f64| l.powf(n) + n * l.powf(n - 1.0);
        let dh = |l: f64| n * l.powf(n - 1.0) + n * (n - 1.0) * l.powf(n - 2.0);
        let l_min = self.e.ln();
        let mut l = s.powf(1.0 / n).max(l_min);
        for _ in 0..100 {
            let step = (h(l) - s) / dh(l);
            let next = (l - step).max(l_min);
            if (next - l).abs() <= 4.0 * f64::EPSILON * l {
                l = next;
                break;
            }
            l = next;
        }
        l
    }

    fn conjugate_eval(&self, s: f64) -> f64 {
        let a = self.linear_slope();
        if s <= a {
            return 0.0;
        }
        if s <= self.right_slope_at_switch() {
            return self.e * (s - a);
        }
        let l = self.log_argmax(s);
        let t = l.exp();
        t * (s - l.powf(self.n))
    }

    fn conjugate_derivative(&self, s: f64) -> f64 {
        if s <= self.linear_slope() {
            0.0
        } else if s <= self.right_slope_at_switch() {
            self.e
        } else {
            self.log_argmax(s).exp()
        }
    }
}

/// Sampling plan for the numerical conjugate: a log-spaced scan of `t`
/// followed by golden-section refinement around the best sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateScan {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub refine_iters: usize,
}

impl Default for ConjugateScan {
    fn default() -> Self {
        Self { t_min: 1e-12, t_max: 1e300, points: 400, refine_iters: 120 }
    }
}

impl ConjugateScan {
    fn validate(&self) -> Result<()> {
        if self.points < 2 || !(self.t_min > 0.0) || !(self.t_max > self.t_min) {
            return Err(Error::invalid("conjugate sample spec is empty"));
        }
        Ok(())
    }
}

#[derive(Clone)]
enum Kind {
    /// `coeff * t^p`, `p >= 1`.
    Power {
        p: f64,
        coeff: f64,
    },
    /// `0` on `[0, bound]`, `+∞` beyond.
    Indicator {
        bound: f64,
    },
    Bump(BumpFamilyParams),
    BumpConjugate(BumpFamilyParams),
    ComposedSquare(Box<YoungFunction>),
    Tabulated {
        t: Arc<[f64]>,
        v: Arc<[f64]>,
    },
    Conjugate {
        base: Box<YoungFunction>,
        scan: ConjugateScan,
    },
    Custom {
        name: Arc<str>,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// An even, convex, lower semicontinuous `θ` with `θ(0) = 0`.
#[derive(Clone)]
pub struct YoungFunction {
    kind: Kind,
}

impl fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "YoungFunction({})", self.name())
    }
}

impl YoungFunction {
    /// `t^p`.
    pub fn power(p: f64) -> Result<Self> {
        Self::scaled_power(p, 1.0)
    }

    /// `coeff * t^p`.
    pub fn scaled_power(p: f64, coeff: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() || !(coeff > 0.0) || !coeff.is_finite() {
            return Err(Error::invalid(format!("power Young function needs p >= 1 and coeff > 0 (p={p}, coeff={coeff})")));
        }
        Ok(Self { kind: Kind::Power { p, coeff } })
    }

    /// `|t|`.
    pub fn abs() -> Self {
        Self { kind: Kind::Power { p: 1.0, coeff: 1.0 } }
    }

    /// `0` for `|t| <= bound`, `+∞` otherwise.
    pub fn indicator(bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::invalid("indicator bound must be positive"));
        }
        Ok(Self { kind: Kind::Indicator { bound } })
    }

    /// The bump function `Φ_N`.
    pub fn bump(params: BumpFamilyParams) -> Self {
        Self { kind: Kind::Bump(params) }
    }

    /// `t ↦ base(t²)`.
    pub fn composed_square(base: YoungFunction) -> Self {
        Self { kind: Kind::ComposedSquare(Box::new(base)) }
    }

    /// Piecewise-linear table through `(0, 0)` and the given knots, extended
    /// past the last knot with the last slope.
    pub fn tabulated(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != v.len() {
            return Err(Error::invalid("tabulated Young function needs matching nonempty columns"));
        }
        let (mut tt, mut vv) = (t, v);
        if tt[0] != 0.0 {
            tt.insert(0, 0.0);
            vv.insert(0, 0.0);
        }
        if vv[0] != 0.0 {
            return Err(Error::invalid("tabulated Young function must vanish at 0"));
        }
        if tt.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tabulated t column must be strictly increasing"));
        }
        if tt.len() < 2 {
            return Err(Error::invalid("tabulated Young function needs a positive knot"));
        }
        let slopes: Vec<f64> = tt.windows(2).zip(vv.windows(2)).map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0])).collect();
        if slopes.iter().any(|s| *s < 0.0) || slopes.windows(2).any(|s| s[1] < s[0] - 1e-12 * s[0].abs().max(1.0)) {
            return Err(Error::invalid("tabulated values are not convex and nondecreasing"));
        }
        Ok(Self { kind: Kind::Tabulated { t: tt.into(), v: vv.into() } })
    }

    /// Reads a `t,theta_t` CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.deserialize::<(f64, f64)>() {
            let (a, b) = rec?;
            t.push(a);
            v.push(b);
        }
        Self::tabulated(t, v)
    }

    /// Arbitrary evaluator on `[0, ∞)`; the caller vouches for the Young axioms.
    pub fn custom(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: Kind::Custom { name: name.into(), f: Arc::new(f) } }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Power { p, coeff } if *coeff == 1.0 => format!("power({p})"),
            Kind::Power { p, coeff } => format!("{coeff}*power({p})"),
            Kind::Indicator { bound } => format!("indicator({bound})"),
            Kind::Bump(b) => format!("bump({})", b.n),
            Kind::BumpConjugate(b) => format!("conjugate(bump({}))", b.n),
            Kind::ComposedSquare(base) => format!("composed_square({})", base.name()),
            Kind::Tabulated { t, .. } => format!("tabulated({} knots)", t.len()),
            Kind::Conjugate { base, .. } => format!("conjugate({})", base.name()),
            Kind::Custom { name, .. } => name.to_string(),
        }
    }

    /// `θ(t)`, with `θ(-t) = θ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.kind {
            Kind::Power { p, coeff } => coeff * t.powf(*p),
            Kind::Indicator { bound } => {
                if t <= *bound {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Kind::Bump(b) => b.eval(t),
            Kind::BumpConjugate(b) => b.conjugate_eval(t),
            Kind::ComposedSquare(base) => base.eval(t * t),
            Kind::Tabulated { t: tt, v } => interp(tt, v, t),
            Kind::Conjugate { base, scan } => numeric_conjugate_at(base, scan, t),
            Kind::Custom { f, .. } => f(t),
        }
    }

    /// A (right) derivative on `[0, ∞)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.kind {
            Kind::Power { p, coeff } => {
                if *p == 1.0 {
                    *coeff
                } else {
                    coeff * p * t.powf(p - 1.0)
                }
            }
            Kind::Indicator { bound } => {
                if t < *bound {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Kind::Bump(b) => b.derivative(t),
            Kind::BumpConjugate(b) => b.conjugate_derivative(t),
            Kind::ComposedSquare(base) => 2.0 * t * base.derivative(t * t),
            Kind::Tabulated { t: tt, v } => {
                let i = match tt.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(i) => i.min(tt.len() - 2),
                    Err(i) => i.saturating_sub(1).min(tt.len() - 2),
                };
                (v[i + 1] - v[i]) / (tt[i + 1] - tt[i])
            }
            Kind::Conjugate { base, scan } => numeric_conjugate_argmax(base, scan, t),
            Kind::Custom { f, .. } => {
                let h = 1e-6 * t.max(1e-6);
                (f(t + h) - f(t)) / h
            }
        }
    }

    /// First `t` at which `θ(t) = ∞`, or `∞`.
    pub fn domain_sup(&self) -> f64 {
        match &self.kind {
            Kind::Indicator { bound } => *bound,
            _ => f64::INFINITY,
        }
    }

    /// Piecewise description, for functions that have branches.
    pub fn branch_info(&self) -> Option<String> {
        match &self.kind {
            Kind::Bump(b) => Some(format!("linear slope {:.6} on [0, {:.6}], t (ln t)^{} beyond", b.linear_slope(), b.e, b.n)),
            Kind::BumpConjugate(b) => {
                Some(format!("zero on [0, {:.6}], linear up to {:.6}, smooth beyond", b.linear_slope(), b.right_slope_at_switch()))
            }
            Kind::Indicator { bound } => Some(format!("zero on [0, {bound}], infinite beyond")),
            Kind::Tabulated { t, .. } => Some(format!("piecewise linear with {} knots", t.len())),
            _ => None,
        }
    }

    /// Closed-form (or semi-analytic) conjugate, when one is known.
    pub fn analytic_conjugate(&self) -> Option<YoungFunction> {
        match &self.kind {
            Kind::Power { p, coeff } if *p == 1.0 => Some(Self { kind: Kind::Indicator { bound: *coeff } }),
            Kind::Power { p, coeff } => {
                // sup_t {s t - c t^p} = c (p-1) (s / (c p))^{p/(p-1)}
                let q = p / (p - 1.0);
                let c = coeff * (p - 1.0) * (coeff * p).powf(-q);
                Some(Self { kind: Kind::Power { p: q, coeff: c } })
            }
            Kind::Indicator { bound } => Some(Self { kind: Kind::Power { p: 1.0, coeff: *bound } }),
            Kind::Bump(b) => Some(Self { kind: Kind::BumpConjugate(*b) }),
            Kind::Conjugate { base, .. } => Some((**base).clone()),
            _ => None,
        }
    }

    /// The conjugate: analytic when available, numerical otherwise.
    pub fn dual(&self) -> YoungFunction {
        self.analytic_conjugate()
            .unwrap_or_else(|| Self { kind: Kind::Conjugate { base: Box::new(self.clone()), scan: ConjugateScan::default() } })
    }
}

fn interp(t: &[f64], v: &[f64], x: f64) -> f64 {
    let n = t.len();
    if x >= t[n - 1] {
        let slope = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
        return v[n - 1] + slope * (x - t[n - 1]);
    }
    let i = t.partition_point(|&a| a <= x).max(1) - 1;
    let w = (x - t[i]) / (t[i + 1] - t[i]);
    v[i] + w * (v[i + 1] - v[i])
}

/// Numerical conjugate `θ̃ = sup_t {s t - θ(t)}` sampled per `scan`.
pub fn conjugate(theta: &YoungFunction, scan: ConjugateScan) -> Result<YoungFunction> {
    scan.validate()?;
    Ok(YoungFunction { kind: Kind::Conjugate { base: Box::new(theta.clone()), scan } })
}

fn numeric_conjugate_search(theta: &YoungFunction, scan: &ConjugateScan, s: f64) -> (f64, f64) {
    let s = s.abs();
    let gain = |t: f64| {
        let th = theta.eval(t);
        if th.is_infinite() {
            f64::NEG_INFINITY
        } else {
            s * t - th
        }
    };
    let (lmin, lmax) = (scan.t_min.ln(), scan.t_max.ln());
    let step = (lmax - lmin) / (scan.points - 1) as f64;
    let mut best = (0.0_f64, 0.0_f64); // (value, argmax); t = 0 always gives 0
    let mut best_idx: Option<usize> = None;
    for i in 0..scan.points {
        let t = (lmin + step * i as f64).exp();
        let g = gain(t);
        if g > best.0 {
            best = (g, t);
            best_idx = Some(i);
        }
    }
    let Some(i) = best_idx else {
        return best;
    };
    if i == scan.points - 1 {
        // still climbing at the end of the scan: the supremum escapes
        return (f64::INFINITY, f64::INFINITY);
    }
    // concave in t, hence unimodal in ln t: the max lies in the neighbouring cells
    let mut a = if i == 0 { lmin - step } else { lmin + step * (i - 1) as f64 };
    let mut b = lmin + step * (i + 1) as f64;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (gain(c.exp()), gain(d.exp()));
    for _ in 0..scan.refine_iters {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = gain(c.exp());
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = gain(d.exp());
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    for (g, l) in [(gc, c), (gd, d)] {
        if g > best.0 {
            best = (g, l.exp());
        }
    }
    best
}

fn numeric_conjugate_at(theta: &YoungFunction, scan: &ConjugateScan, s: f64) -> f64 {
    numeric_conjugate_search(theta, scan, s).0
}

fn numeric_conjugate_argmax(theta: &YoungFunction, scan: &ConjugateScan, s: f64) -> f64 {
    numeric_conjugate_search(theta, scan, s).1
}

/// Smallest `t >= 0` with `θ(t) = s`, resolved by bisection to relative `tol`.
pub fn inverse_young(theta: &YoungFunction, s: f64, tol: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("inverse_young needs s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    const LIMIT: f64 = 1e300;
    let mut hi = 1.0;
    while theta.eval(hi) < s {
        hi *= 2.0;
        if hi > LIMIT {
            return Err(Error::BracketExhausted { target: s, limit: LIMIT });
        }
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol * hi {
            break;
        }
        if theta.eval(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Checks the Young axioms on a log-spaced sample of `[t_min, t_max]`:
/// `θ(0) = 0`, monotonicity and midpoint convexity up to `tol` (relative).
pub fn validate_young(theta: &YoungFunction, t_min: f64, t_max: f64, points: usize, tol: f64) -> Result<()> {
    if theta.eval(0.0) != 0.0 {
        return Err(Error::invalid(format!("{}: θ(0) != 0", theta.name())));
    }
    let ts: Vec<f64> = (0..points).map(|i| (t_min.ln() + (t_max.ln() - t_min.ln()) * i as f64 / (points - 1) as f64).exp()).collect();
    let mut prev = 0.0_f64;
    for &t in &ts {
        let v = theta.eval(t);
        if v.is_nan() || v < prev - tol * prev.abs().max(1.0) {
            return Err(Error::invalid(format!("{}: not nondecreasing at t = {t}", theta.name())));
        }
        if theta.eval(-t) != v {
            return Err(Error::invalid(format!("{}: not even at t = {t}", theta.name())));
        }
        prev = v;
    }
    for w in ts.windows(3) {
        let (a, b) = (w[0], w[2]);
        let (fa, fb) = (theta.eval(a), theta.eval(b));
        if fa.is_infinite() || fb.is_infinite() {
            continue;
        }
        let mid = theta.eval(0.5 * (a + b));
        let avg = 0.5 * (fa + fb);
        if mid > avg + tol * avg.abs().max(1.0) {
            return Err(Error::invalid(format!("{}: midpoint convexity fails on [{a}, {b}]", theta.name())));
        }
    }
    Ok(())
}

/// Parses the config names `power(p)`, `bump(N)`, `composed_square(<base>)`,
/// `tabulated(<path>)` and `abs`.
pub fn parse_young(spec: &str) -> Result<YoungFunction> {
    let spec = spec.trim();
    if spec == "abs" {
        return Ok(YoungFunction::abs());
    }
    let (head, arg) = split_call(spec).ok_or_else(|| Error::Config(format!("unrecognised Young function `{spec}`")))?;
    let num = |a: &str| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{a}` in `{spec}`")));
    match head {
        "power" => YoungFunction::power(num(arg)?),
        "bump" => Ok(YoungFunction::bump(BumpFamilyParams::new(num(arg)?)?)),
        "composed_square" => Ok(YoungFunction::composed_square(parse_young(arg)?)),
        "tabulated" => YoungFunction::from_csv(Path::new(arg.trim())),
        _ => Err(Error::Config(format!("unknown Young function `{head}`"))),
    }
}

/// Splits `name(args)` into `("name", "args")`.
pub(crate) fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    Some((s[..open].trim(), &s[open + 1..s.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_conjugate(theta: &YoungFunction, s: f64, t_max: f64) -> f64 {
        // uniform grid, then ternary search in the cell pair around the best node (s t - theta(t) is concave)
        let n = 200_000;
        let h = t_max / n as f64;
        let g = |t: f64| s * t - theta.eval(t);
        let best = (0..=n).max_by(|&i, &j| g(i as f64 * h).total_cmp(&g(j as f64 * h))).unwrap();
        let (mut lo, mut hi) = ((best as f64 - 1.0).max(0.0) * h, (best as f64 + 1.0) * h);
        for _ in 0..200 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if g(m1) < g(m2) {
                lo = m1
            } else {
                hi = m2
            }
        }
        g(0.5 * (lo + hi)).max(g(best as f64 * h))
    }

    #[test]
    fn conjugate_of_half_square_at_one() {
        let theta = YoungFunction::scaled_power(2.0, 0.5).unwrap();
        let c = conjugate(&theta, ConjugateScan::default()).unwrap();
        assert_relative_eq!(c.eval(1.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(theta.analytic_conjugate().unwrap().eval(1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn conjugate_at_zero_is_zero() {
        let c = conjugate(&YoungFunction::power(2.0).unwrap(), ConjugateScan::default()).unwrap();
        assert_eq!(c.eval(0.0), 0.0);
    }

    #[test]
    fn conjugate_of_abs_below_slope() {
        let theta = YoungFunction::abs();
        let oracle = brute_conjugate(&theta, 0.5, 10.0);
        assert_eq!(oracle, 0.0);
        let c = conjugate(&theta, ConjugateScan::default()).unwrap();
        assert_eq!(c.eval(0.5), 0.0);
        assert!(c.eval(1.5).is_infinite());
    }

    #[test]
    fn empty_scan_is_rejected() {
        let scan = ConjugateScan { points: 0, ..Default::default() };
        assert!(matches!(conjugate(&YoungFunction::abs(), scan), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn numeric_conjugate_matches_brute_force() {
        for theta in [YoungFunction::power(4.0).unwrap(), YoungFunction::bump(BumpFamilyParams::new(1.0).unwrap())] {
            let c = conjugate(&theta, ConjugateScan::default()).unwrap();
            for s in [0.3, 1.0, 2.5, 3.0, 5.0] {
                let oracle = brute_conjugate(&theta, s, 60.0);
                assert!((c.eval(s) - oracle).abs() <= 1e-6 * oracle.max(1.0), "{} at {s}: {} vs {oracle}", theta.name(), c.eval(s));
            }
        }
    }

    #[test]
    fn bump_conjugate_matches_numeric_conjugate() {
        for n in [1.0, 2.0, 3.5] {
            let theta = YoungFunction::bump(BumpFamilyParams::new(n).unwrap());
            let semi = theta.analytic_conjugate().unwrap();
            let numeric = conjugate(&theta, ConjugateScan::default()).unwrap();
            for s in [0.5, 4.0, 16.0, 16.5, 20.0, 50.0, 300.0, 1e4] {
                let (a, b) = (semi.eval(s), numeric.eval(s));
                if a.is_infinite() || b.is_infinite() {
                    assert_eq!(a, b, "N={n} s={s}");
                    continue;
                }
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "N={n} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bump_examples() {
        let phi1 = YoungFunction::bump(BumpFamilyParams::new(1.0).unwrap());
        let e2 = 1f64.exp().powi(2);
        assert_relative_eq!(phi1.eval(e2), 2.0 * e2, max_relative = 1e-14);
        assert_relative_eq!(phi1.eval(e2), 14.7781121978613, max_relative = 1e-12);
        let phi2 = YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap());
        assert_relative_eq!(phi2.eval(1.0), 16.0, max_relative = 1e-14);
        assert_eq!(phi2.eval(0.0), 0.0);
        assert!(BumpFamilyParams::new(0.5).is_err());
    }

    #[test]
    fn bump_is_continuous_at_switch_point() {
        for n in [1.0, 1.5, 2.0, 7.0] {
            let b = BumpFamilyParams::new(n).unwrap();
            let e = b.switch_point();
            assert_eq!(e, (2.0 * n).exp());
            assert_eq!(b.linear_slope() * e, e * e.ln().powf(n));
        }
    }

    #[test]
    fn inverse_young_examples() {
        assert_relative_eq!(inverse_young(&YoungFunction::power(2.0).unwrap(), 9.0, 1e-15).unwrap(), 3.0, max_relative = 1e-12);
        let phi1 = YoungFunction::bump(BumpFamilyParams::new(1.0).unwrap());
        let e2 = 1f64.exp().powi(2);
        assert_relative_eq!(inverse_young(&phi1, 2.0 * e2, 1e-15).unwrap(), e2, max_relative = 1e-12);
        assert_eq!(inverse_young(&phi1, 0.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn inverse_young_reports_exhausted_bracket() {
        let theta = YoungFunction::custom("capped", |t: f64| t.min(1.0));
        assert!(matches!(inverse_young(&theta, 2.0, 1e-12), Err(Error::BracketExhausted { .. })));
    }

    #[test]
    fn standard_functions_are_young() {
        let fns = [
            YoungFunction::power(2.0).unwrap(),
            YoungFunction::power(4.0).unwrap(),
            YoungFunction::abs(),
            YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap()),
            YoungFunction::composed_square(YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap())),
            YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap()).dual(),
        ];
        for f in &fns {
            validate_young(f, 1e-6, 1e6, 400, 1e-9).unwrap();
        }
    }

    #[test]
    fn tabulated_interpolates_and_rejects_bad_tables() {
        let t = YoungFunction::tabulated(vec![1.0, 2.0, 3.0], vec![1.0, 4.0, 9.0]).unwrap();
        assert_relative_eq!(t.eval(1.5), 2.5);
        assert_relative_eq!(t.eval(4.0), 14.0);
        assert_relative_eq!(t.eval(0.5), 0.5);
        assert!(YoungFunction::tabulated(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(YoungFunction::tabulated(vec![1.0, 2.0, 3.0], vec![1.0, 4.0, 5.0]).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(parse_young("power(2)").unwrap().name(), "power(2)");
        assert_eq!(parse_young("composed_square(bump(2))").unwrap().name(), "composed_square(bump(2))");
        assert!(parse_young("gauss(1)").is_err());
    }
}
