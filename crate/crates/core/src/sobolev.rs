//! Sobolev and Orlicz–Sobolev ratios, empirical best constants, and the chain of estimates
//! that forces an Orlicz–Sobolev inequality from sup bounds.

use serde::{Deserialize, Serialize};

use crate::degiorgi::{field_sup, tol_disc};
use crate::dirichlet::{assemble_operator, corner_integral, energy, pcg, WeakProblem};
use crate::error::{Error, Result};
use crate::geometry::{DomainMask, Grid, MatrixField};
use crate::orlicz::{luxembourg, NormalizedMeasure};
use crate::young::YoungFunction;

/// Operator, domain and measure, without a load.
#[derive(Debug, Clone)]
pub struct Setting {
    pub a: MatrixField,
    pub mask: DomainMask,
    pub grid: Grid,
    pub mu: NormalizedMeasure,
}

impl Setting {
    pub fn new(a: MatrixField, mask: DomainMask, grid: Grid) -> Result<Self> {
        a.check_psd(&grid)?;
        let mu = mask.measure(&grid)?;
        Ok(Self { a, mask, grid, mu })
    }

    pub fn from_problem(p: &WeakProblem) -> Self {
        Self { a: p.a.clone(), mask: p.mask.clone(), grid: p.grid, mu: p.mu.clone() }
    }

    pub fn energy(&self, w: &[f64]) -> f64 {
        energy(w, &self.a, &self.mask, &self.grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub test_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn check_field(w: &[f64], s: &Setting) -> Result<()> {
    if w.len() != s.grid.len() {
        return Err(Error::invalid("test field length does not match grid"));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("test field must be finite"));
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("test field vanishes identically"));
    }
    Ok(())
}

/// `‖w‖_{L^φ(dμ)} / (∫ |∇_A w|² dμ)^{1/2}`.
///
/// A vanishing right side under a nonzero left side means the inequality cannot hold for
/// any constant, reported as [`Error::InequalityFails`].
pub fn orlicz_sobolev_ratio(w: &[f64], phi: &YoungFunction, s: &Setting, test_id: &str) -> Result<RatioReport> {
    check_field(w, s)?;
    let lhs = luxembourg(w, phi, &s.mu)?;
    let e = s.energy(w).max(0.0);
    let rhs = e.sqrt();
    // energies at rounding level of the field count as zero
    let scale = field_sup(w).powi(2);
    if rhs == 0.0 || e <= 1e-24 * scale {
        if lhs > 0.0 {
            return Err(Error::InequalityFails { lhs });
        }
        return Err(Error::invalid("test field has zero norm and zero energy"));
    }
    Ok(RatioReport { test_id: test_id.to_string(), lhs, rhs, ratio: lhs / rhs })
}

/// `(∫|w|^{2σ})^{1/(2σ)}` against `r (∫|∇_A w|²)^{1/2} + (∫|w|²)^{1/2}`.
pub fn classical_weak_sobolev_check(w: &[f64], sigma: f64, s: &Setting, r: f64, test_id: &str) -> Result<RatioReport> {
    if !(sigma > 1.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must exceed 1, got {sigma}")));
    }
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("radius must be nonnegative, got {r}")));
    }
    check_field(w, s)?;
    let p = 2.0 * sigma;
    // scale out max|w| before the high power
    let m = field_sup(w);
    let lhs = m * s.mu.integrate_map(w, |v| (v / m).abs().powf(p)).powf(1.0 / p);
    let l2 = s.mu.integrate_map(w, |v| v * v).sqrt();
    let rhs = r * s.energy(w).max(0.0).sqrt() + l2;
    Ok(RatioReport { test_id: test_id.to_string(), lhs, rhs, ratio: lhs / rhs })
}

/// Euclidean distance from each interior node to the nearest non-interior mask node (0 elsewhere).
pub fn boundary_distance(mask: &DomainMask, grid: &Grid) -> Vec<f64> {
    let outer: Vec<(f64, f64)> = (0..grid.len()).filter(|&k| mask.is_boundary(k)).map(|k| grid.point(k)).collect();
    (0..grid.len())
        .map(|k| {
            if !mask.is_interior(k) {
                return 0.0;
            }
            let (x, y) = grid.point(k);
            outer.iter().map(|(a, b)| (x - a).hypot(y - b)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Version tag of [`test_family`]; bump when the list changes.
pub const FAMILY_VERSION: &str = "family-v1";

/// Ids produced by [`test_family`], in order.
pub const FAMILY_IDS: [&str; 8] =
    ["tent", "tent_sq", "sine", "plateau(0.5)", "plateau(0.25)", "log_bump(0.25)", "log_bump(0.5)", "log_bump(1)"];

/// Deterministic test functions built from the normalized boundary distance `ρ = d/max d`:
/// tent `ρ`, `ρ²`, `sin(πρ/2)`, plateaus `min(1, ρ/s)` and log bumps `(ln 1/(1−ρ))^a`.
pub fn test_family(mask: &DomainMask, grid: &Grid) -> Vec<(String, Vec<f64>)> {
    let d = boundary_distance(mask, grid);
    let dmax = d.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rho: Vec<f64> = d.iter().map(|v| v / dmax).collect();
    let floor = 0.5 * grid.h / dmax;
    let map = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        rho.iter().enumerate().map(|(k, &r)| if mask.is_interior(k) { f(r) } else { 0.0 }).collect()
    };
    let mut out = vec![
        ("tent".to_string(), map(&|r| r)),
        ("tent_sq".to_string(), map(&|r| r * r)),
        ("sine".to_string(), map(&|r| (0.5 * std::f64::consts::PI * r).sin())),
    ];
    for s in [0.5, 0.25] {
        out.push((format!("plateau({s})"), map(&|r| (r / s).min(1.0))));
    }
    for a in [0.25, 0.5, 1.0] {
        out.push((format!("log_bump({a})"), map(&|r| (1.0 / (1.0 - r).max(floor)).ln().powf(a))));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    /// Largest ratio seen: a certified lower bound for the optimal constant.
    pub lower_bound: f64,
    pub maximizer_id: String,
    pub trials: usize,
    pub family: String,
    pub ratios: Vec<RatioReport>,
}

/// Maximizes [`orlicz_sobolev_ratio`] over the first `budget` trials: the family in order,
/// then inverse-iteration refinement `w ← K⁻¹Mw` from the best family member.
///
/// Trials for a larger budget extend those for a smaller one, so the bound is monotone in
/// the budget.
pub fn best_constant_search(phi: &YoungFunction, s: &Setting, budget: usize) -> Result<ConstantEstimate> {
    best_constant_search_with(phi, s, test_family(&s.mask, &s.grid), budget)
}

/// [`best_constant_search`] over a caller-chosen (for instance filtered) family.
pub fn best_constant_search_with(
    phi: &YoungFunction,
    s: &Setting,
    family: Vec<(String, Vec<f64>)>,
    budget: usize,
) -> Result<ConstantEstimate> {
    if budget == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    let mut ratios = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let consider = |id: String, w: Vec<f64>, ratios: &mut Vec<RatioReport>, best: &mut Option<(f64, usize, Vec<f64>)>| -> Result<()> {
        match orlicz_sobolev_ratio(&w, phi, s, &id) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.ratio > b.0) {
                    *best = Some((r.ratio, ratios.len(), w));
                }
                ratios.push(r);
                Ok(())
            }
            Err(Error::InequalityFails { lhs }) => {
                ratios.push(RatioReport { test_id: id, lhs, rhs: 0.0, ratio: f64::INFINITY });
                Err(Error::InequalityFails { lhs })
            }
            Err(e) => Err(e),
        }
    };
    for (id, w) in family.into_iter().take(budget) {
        consider(id, w, &mut ratios, &mut best)?;
    }
    if budget > ratios.len() {
        let st = assemble_operator(&s.a, &s.mask, &s.grid)?;
        let mut w = best.as_ref().map(|b| st.dofs.restrict(&b.2)).unwrap_or_default();
        let max_iter = (20 * st.dofs.len()).max(1000);
        let start = ratios.len();
        for j in 0..budget - start {
            let mw: Vec<f64> = w.iter().zip(&st.mass).map(|(a, m)| a * m).collect();
            let mut next = w.clone();
            let out = pcg(&st.k, &mw, &mut next, 1e-10, max_iter);
            if !out.converged {
                return Err(Error::NonCoercive { ritz: 0.0 });
            }
            let m = next.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            next.iter_mut().for_each(|v| *v /= m);
            w = next;
            consider(format!("refine({})", j + 1), st.dofs.extend(&w), &mut ratios, &mut best)?;
        }
    }
    let (lower_bound, idx, _) = best.ok_or_else(|| Error::invalid("no admissible test function"))?;
    Ok(ConstantEstimate {
        lower_bound,
        maximizer_id: ratios[idx].test_id.clone(),
        trials: ratios.len(),
        family: FAMILY_VERSION.to_string(),
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSupReport {
    /// `sup ∫ w² g dμ` over the candidates.
    pub sup_x: f64,
    /// Same with every `g` replaced by `g⁺`.
    pub sup_y: f64,
    /// Per candidate: `∫ w² g⁺ − ∫ w² g`.
    pub slacks: Vec<f64>,
}

/// Compares the pairing of `w²` with signed candidates against their positive parts.
pub fn dual_sup_nonneg_check(
    w: &[f64],
    theta_conj: &YoungFunction,
    mu: &NormalizedMeasure,
    candidates: &[Vec<f64>],
) -> Result<DualSupReport> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    let w2: Vec<f64> = w.iter().map(|v| v * v).collect();
    let pair = |g: &[f64]| w2.iter().zip(g).zip(mu.weights()).map(|((a, b), m)| m * a * b).sum::<f64>();
    let (mut sup_x, mut sup_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut slacks = Vec::with_capacity(candidates.len());
    for (i, g) in candidates.iter().enumerate() {
        if g.len() != mu.len() {
            return Err(Error::invalid(format!("candidate {i} has the wrong length")));
        }
        let modular = mu.integrate_map(g, |v| theta_conj.eval(v));
        if !(modular <= 1.0 + 1e-12) {
            return Err(Error::invalid(format!("candidate {i} violates the modular constraint ({modular})")));
        }
        let gp: Vec<f64> = g.iter().map(|v| v.max(0.0)).collect();
        let (x, y) = (pair(g), pair(&gp));
        sup_x = sup_x.max(x);
        sup_y = sup_y.max(y);
        slacks.push(y - x);
    }
    Ok(DualSupReport { sup_x, sup_y, slacks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub rows: Vec<InequalityRow>,
    pub tol_disc: f64,
    pub sup_u: f64,
    /// `‖f‖_{L^θ̃}` when a conjugate function is supplied.
    pub f_norm: Option<f64>,
    /// `sup|u| / ‖f‖_{L^θ̃}`.
    pub sup_ratio: Option<f64>,
    /// Constant in the closing estimate, `4 + 4√5`.
    pub constant: f64,
}

impl NecessityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.slack >= -self.tol_disc)
    }
}

/// The chain from the weak equation with `f ≥ 0`, for a solution `u` and test field `w`:
///
/// 1. `∫w²f ≤ 2 (∫w²[∇u]²_A)^{1/2} (∫[∇w]²_A)^{1/2}`
/// 2. `∫w²[∇u]²_A ≤ ½∫w²[∇u]²_A + 8∫u²[∇w]²_A + ∫|u| w² |f|`
/// 3. `∫w²f ≤ (4 + 4√5) sup|u| ∫[∇w]²_A`, i.e. `‖f‖_{L^θ̃}` times the `sup|u|/‖f‖_{L^θ̃}` ratio.
pub fn necessity_chain_check(u: &[f64], w: &[f64], problem: &WeakProblem, theta_conj: Option<&YoungFunction>) -> Result<NecessityReport> {
    let (a, mask, grid, mu) = (&problem.a, &problem.mask, &problem.grid, &problem.mu);
    if let Some(k) = (0..grid.len()).find(|&k| mask.contains(k) && problem.f[k] < 0.0) {
        return Err(Error::invalid(format!("load must be nonnegative; f = {} at node {k}", problem.f[k])));
    }
    if u.len() != grid.len() || w.len() != grid.len() {
        return Err(Error::invalid("field length does not match grid"));
    }
    let f = &problem.f;
    let ew = energy(w, a, mask, grid).max(0.0);
    let iwu = corner_integral(&[u], a, mask, grid, |k, g, am| w[k] * w[k] * am.quad(g[0]));
    let iuw = corner_integral(&[w], a, mask, grid, |k, g, am| u[k] * u[k] * am.quad(g[0]));
    let lhs_f: Vec<f64> = w.iter().zip(f).map(|(a, b)| a * a * b).collect();
    let x = mu.integrate(&lhs_f);
    let uwf: Vec<f64> = (0..grid.len()).map(|k| u[k].abs() * w[k] * w[k] * f[k].abs()).collect();
    let sup_u = field_sup(u);
    let f_sup = (0..grid.len()).filter(|&k| mask.contains(k)).map(|k| f[k].abs()).fold(0.0, f64::max);
    let constant = 4.0 + 4.0 * 5f64.sqrt();
    let row = |name: &str, lhs: f64, rhs: f64| InequalityRow { name: name.to_string(), lhs, rhs, slack: rhs - lhs };
    let rows = vec![
        row("(i) pairing vs energies", x, 2.0 * (iwu * ew).sqrt()),
        row("(ii) weighted energy", iwu, 0.5 * iwu + 8.0 * iuw + mu.integrate(&uwf)),
        row("(iii) closing estimate", x, constant * sup_u * ew),
    ];
    let (f_norm, sup_ratio) = match theta_conj {
        Some(t) => {
            let n = luxembourg(f, t, mu)?;
            (Some(n), (n > 0.0).then(|| sup_u / n))
        }
        None => (None, None),
    };
    Ok(NecessityReport { rows, tol_disc: tol_disc(grid.h, f_sup, sup_u), sup_u, f_norm, sup_ratio, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{poincare_constant, solve_dirichlet};
    use crate::geometry::{Domain, Sym2};
    use crate::young::BumpFamilyParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setting(domain: Domain, n: usize, a: MatrixField) -> Setting {
        let g = domain.grid(n).unwrap();
        let m = domain.mask(&g).unwrap();
        Setting::new(a, m, g).unwrap()
    }

    fn square(n: usize, a: MatrixField) -> Setting {
        setting(Domain::Square { side: 1.0 }, n, a)
    }

    fn sq() -> YoungFunction {
        YoungFunction::power(2.0).unwrap()
    }

    #[test]
    fn family_ids_are_listed() {
        let s = square(17, MatrixField::identity());
        let ids: Vec<String> = test_family(&s.mask, &s.grid).into_iter().map(|(id, _)| id).collect();
        assert_eq!(ids, FAMILY_IDS);
    }

    #[test]
    fn tent_ratio_below_poincare() {
        let s = square(33, MatrixField::identity());
        let fam = test_family(&s.mask, &s.grid);
        let r = orlicz_sobolev_ratio(&fam[0].1, &sq(), &s, "tent").unwrap();
        let c = poincare_constant(&s.a, &s.mask, &s.grid).unwrap().constant;
        assert!(r.ratio <= c.sqrt() + 1e-9, "{} vs {}", r.ratio, c.sqrt());
        assert_relative_eq!(r.ratio, r.lhs / r.rhs);
    }

    #[test]
    fn zero_and_degenerate_fields() {
        let s = square(17, MatrixField::identity());
        assert!(matches!(orlicz_sobolev_ratio(&vec![0.0; s.grid.len()], &sq(), &s, "zero"), Err(Error::InvalidArgument(_))));
        let s = square(17, MatrixField::constant(Sym2::diag(1.0, 0.0)));
        let w = s.grid.sample(|_, y| (std::f64::consts::PI * (y + 0.5)).sin());
        assert!(matches!(orlicz_sobolev_ratio(&w, &sq(), &s, "y_only"), Err(Error::InequalityFails { .. })));
    }

    #[test]
    fn classical_check_examples() {
        let s = square(33, MatrixField::identity());
        let tent = &test_family(&s.mask, &s.grid)[0].1;
        assert!(classical_weak_sobolev_check(tent, 1.0, &s, 1.0, "tent").is_err());
        let near_one = classical_weak_sobolev_check(tent, 1.0 + 1e-9, &s, 1.0, "tent").unwrap();
        assert!(near_one.ratio <= 1.0 + 1e-6);
        let r: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&n| {
                let s = square(n, MatrixField::identity());
                classical_weak_sobolev_check(&test_family(&s.mask, &s.grid)[0].1, 2.0, &s, 1.0, "tent").unwrap().ratio
            })
            .collect();
        assert!(((r[2] - r[1]) / r[2]).abs() <= 0.05, "{r:?}");
    }

    #[test]
    fn search_matches_poincare_for_squares() {
        let s = square(65, MatrixField::identity());
        let est = best_constant_search(&sq(), &s, 16).unwrap();
        let c = poincare_constant(&s.a, &s.mask, &s.grid).unwrap().constant;
        assert!(est.lower_bound <= c.sqrt() * (1.0 + 1e-9));
        assert!(est.lower_bound >= 0.95 * c.sqrt(), "{} vs {}", est.lower_bound, c.sqrt());
        let max = est.ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
        assert_eq!(est.lower_bound, max);
    }

    #[test]
    fn budget_one_is_the_tent() {
        let s = square(17, MatrixField::identity());
        let est = best_constant_search(&sq(), &s, 1).unwrap();
        assert_eq!(est.trials, 1);
        assert_eq!(est.maximizer_id, "tent");
        let direct = orlicz_sobolev_ratio(&test_family(&s.mask, &s.grid)[0].1, &sq(), &s, "tent").unwrap();
        assert_eq!(est.lower_bound, direct.ratio);
    }

    #[test]
    fn search_is_monotone_in_budget() {
        let s = setting(Domain::Disk { radius: 1.0 }, 33, MatrixField::grushin());
        let mut prev = 0.0;
        for b in [1, 3, 8, 10, 14] {
            let est = best_constant_search(&sq(), &s, b).unwrap();
            assert!(est.lower_bound >= prev);
            prev = est.lower_bound;
        }
    }

    #[test]
    fn bump_composition_grushin_is_refinement_stable() {
        let phi = YoungFunction::composed_square(YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap()));
        let v: Vec<f64> = [33, 65]
            .iter()
            .map(|&n| {
                let s = setting(Domain::Disk { radius: 1.0 }, n, MatrixField::grushin());
                best_constant_search(&phi, &s, 12).unwrap().lower_bound
            })
            .collect();
        assert!(v.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(((v[1] - v[0]) / v[1]).abs() <= 0.10, "{v:?}");
    }

    #[test]
    fn dual_sup_examples() {
        let mu = NormalizedMeasure::uniform(4);
        let conj = YoungFunction::scaled_power(2.0, 0.25).unwrap();
        let w = vec![1.0; 4];
        let g = vec![1.0, -1.0, 0.5, -0.5];
        let rep = dual_sup_nonneg_check(&w, &conj, &mu, &[g]).unwrap();
        assert!(rep.sup_y >= rep.sup_x);
        let pos = vec![1.0, 0.0, 0.5, 0.25];
        let rep = dual_sup_nonneg_check(&w, &conj, &mu, &[pos]).unwrap();
        assert_eq!(rep.sup_x, rep.sup_y);
        assert!(dual_sup_nonneg_check(&w, &conj, &mu, &[vec![5.0; 4]]).is_err());
    }

    #[test]
    fn necessity_examples() {
        let d = Domain::Disk { radius: 1.0 };
        let g = d.grid(65).unwrap();
        let m = d.mask(&g).unwrap();
        let p = WeakProblem::new(MatrixField::identity(), vec![1.0; g.len()], m.clone(), g).unwrap();
        let (u, _) = solve_dirichlet(&p, 1e-10).unwrap();
        let tent = test_family(&m, &g)[0].1.clone();
        let conj = YoungFunction::bump(BumpFamilyParams::new(2.0).unwrap()).dual();
        let rep = necessity_chain_check(&u, &tent, &p, Some(&conj)).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        assert!(rep.sup_ratio.unwrap() > 0.0);
        let zero = necessity_chain_check(&u, &vec![0.0; g.len()], &p, None).unwrap();
        assert!(zero.rows.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0));
        let p0 = p.with_load(vec![0.0; g.len()]).unwrap();
        let (u0, _) = solve_dirichlet(&p0, 1e-10).unwrap();
        let r0 = necessity_chain_check(&u0, &tent, &p0, None).unwrap();
        assert!(r0.rows.iter().all(|r| r.lhs == 0.0 && r.slack >= 0.0));
        let neg = p.with_load(vec![-1.0; g.len()]).unwrap();
        assert!(necessity_chain_check(&u, &tent, &neg, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ratio_is_scale_invariant(lambda in 0.01f64..100.0, which in 0usize..8) {
            let s = square(17, MatrixField::grushin());
            let phi = YoungFunction::composed_square(YoungFunction::bump(BumpFamilyParams::new(1.0).unwrap()));
            let w = test_family(&s.mask, &s.grid)[which].1.clone();
            let scaled: Vec<f64> = w.iter().map(|v| v * lambda).collect();
            let a = orlicz_sobolev_ratio(&w, &phi, &s, "w").unwrap().ratio;
            let b = orlicz_sobolev_ratio(&scaled, &phi, &s, "w").unwrap().ratio;
            prop_assert!(((a - b) / a).abs() <= 1e-9);
        }

        #[test]
        fn positive_part_never_decreases_pairing(g in proptest::collection::vec(-1.0f64..1.0, 6), w in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let mu = NormalizedMeasure::uniform(6);
            let conj = YoungFunction::scaled_power(2.0, 0.25).unwrap();
            let rep = dual_sup_nonneg_check(&w, &conj, &mu, &[g]).unwrap();
            prop_assert!(rep.slacks.iter().all(|s| *s >= -1e-12));
            prop_assert!(rep.sup_y - rep.sup_x >= -1e-12);
        }
    }
}
