//! Adaptive Gauss–Kronrod (7/15) quadrature, in plain and log-magnitude form.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// The fifteen nodes of `[a, b]` in the order used by [`kronrod_sums`].
fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut x = [c; 15];
    for k in 0..7 {
        x[2 * k] = c - hw * XGK[k];
        x[2 * k + 1] = c + hw * XGK[k];
    }
    x
}

/// `(kronrod, gauss)` sums of values laid out as in [`nodes`], unscaled by the half width.
fn kronrod_sums(v: &[f64; 15]) -> (f64, f64) {
    let mut k = WGK[7] * v[14];
    let mut g = WG[3] * v[14];
    for j in 0..7 {
        let pair = v[2 * j] + v[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k, g)
}

/// One 15-point panel: `(estimate, error estimate)`.
pub fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let x = nodes(a, b);
    let v = x.map(f);
    let (k, g) = kronrod_sums(&v);
    let hw = 0.5 * (b - a);
    (k * hw, ((k - g) * hw).abs())
}

/// Global adaptive bisection: the worst panel is split until the summed error is below
/// `max(abs_tol, rel_tol·|total|)` or the panel budget is spent.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    const MAX_PANELS: usize = 2000;
    if a == b {
        return 0.0;
    }
    let (v, e) = gauss_kronrod(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || panels.len() >= MAX_PANELS || !err.is_finite() {
            return total;
        }
        let worst = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).unwrap();
        let (pa, pb, _, _) = panels[worst];
        let m = 0.5 * (pa + pb);
        if !(m > pa && m < pb) {
            panels[worst].3 = 0.0;
            continue;
        }
        let (lv, le) = gauss_kronrod(&f, pa, m);
        let (rv, re) = gauss_kronrod(&f, m, pb);
        panels[worst] = (pa, m, lv, le);
        panels.push((m, pb, rv, re));
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Panel estimate of `ln ∫ e^{logf}` with the log of its error estimate.
fn log_panel(logf: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let l = nodes(a, b).map(logf);
    let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    if !m.is_finite() {
        return (m, m);
    }
    let v = l.map(|x| (x - m).exp());
    let (k, g) = kronrod_sums(&v);
    let hw = 0.5 * (b - a);
    // rounding in the log values themselves bounds the attainable relative accuracy
    let floor = 64.0 * f64::EPSILON * (1.0 + m.abs());
    let err = if (k - g).abs() <= floor * k { f64::NEG_INFINITY } else { m + ((k - g).abs() * hw).ln() };
    (m + (k * hw).ln(), err)
}

/// `ln ∫_a^b e^{logf(s)} ds` for integrands whose magnitude over- or underflows `f64`.
///
/// Global adaptive: the panel with the largest error is bisected until the summed error
/// falls below `rel_tol` times the running estimate. `breaks` seed the initial partition.
pub fn integrate_log(logf: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    integrate_log_abs(logf, a, b, breaks, rel_tol, f64::NEG_INFINITY)
}

/// As [`integrate_log`], also stopping once the summed error is below `e^{log_abs_tol}`.
pub fn integrate_log_abs(logf: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], rel_tol: f64, log_abs_tol: f64) -> f64 {
    const MAX_PANELS: usize = 4000;
    if !(b > a) {
        return f64::NEG_INFINITY;
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    let mut panels: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = log_panel(&logf, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    let ln_rel = rel_tol.ln();
    loop {
        let total = panels.iter().fold(f64::NEG_INFINITY, |acc, p| log_add(acc, p.2));
        if !total.is_finite() {
            return total;
        }
        let err = panels.iter().fold(f64::NEG_INFINITY, |acc, p| log_add(acc, p.3));
        if err <= (ln_rel + total).max(log_abs_tol) || panels.len() >= MAX_PANELS {
            return total;
        }
        let worst = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).unwrap();
        let (pa, pb, _, _) = panels[worst];
        let m = 0.5 * (pa + pb);
        if !(m > pa && m < pb) {
            // cannot split further in floating point
            panels[worst].3 = f64::NEG_INFINITY;
            continue;
        }
        let (lv, le) = log_panel(&logf, pa, m);
        let (rv, re) = log_panel(&logf, m, pb);
        panels[worst] = (pa, m, lv, le);
        panels.push((m, pb, rv, re));
    }
}

/// Geometric breakpoints `a·2^k` strictly inside `(a, b)`, for integrands spread over many scales.
pub fn geometric_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if a <= 0.0 {
        return out;
    }
    let mut x = 2.0 * a;
    while x < b && out.len() < 4096 {
        out.push(x);
        x *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact_on_one_panel() {
        let (v, _) = gauss_kronrod(&|x: f64| x.powi(6) - 2.0 * x, 0.0, 2.0);
        assert_relative_eq!(v, 128.0 / 7.0 - 4.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-12, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn log_space_matches_closed_forms() {
        // ∫_1^40 e^{3s} ds
        let l = integrate_log(|s| 3.0 * s, 1.0, 40.0, &[], 1e-12);
        let exact = (40.0 * 3.0_f64).exp() / 3.0 - 3.0_f64.exp() / 3.0;
        assert_relative_eq!(l, exact.ln(), max_relative = 1e-12);
        // ∫_1^∞-ish s^{-7/4}
        let l = integrate_log(|s: f64| -1.75 * s.ln(), 1.0, 1e8, &geometric_breaks(1.0, 1e8), 1e-12);
        let exact = (1.0 - 1e8_f64.powf(-0.75)) / 0.75;
        assert_relative_eq!(l.exp(), exact, max_relative = 1e-9);
        // overflow regime: ∫_0^1000 e^{s²/2}, compare against the asymptotic e^{b²/2}/b
        let l = integrate_log(|s| 0.5 * s * s, 0.0, 1000.0, &[], 1e-12);
        let asym = 0.5 * 1000.0_f64.powi(2) - 1000.0_f64.ln();
        assert!((l - asym).abs() < 1e-5, "{l} vs {asym}");
    }

    #[test]
    fn log_add_is_symmetric_and_stable() {
        assert_relative_eq!(log_add(1000.0, 1000.0), 1000.0 + 2f64.ln());
        assert_eq!(log_add(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
