//! Discrete weak formulation of `∇·A∇u = f` with zero boundary values.
//!
//! Bilinear elements on the grid cells, `A` sampled at cell midpoints, and vertex
//! quadrature, so that `A = I` gives the 5-point stencil and the mass matrix is the
//! diagonal of measure weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainMask, Grid, MatrixField, Sym2};
use crate::orlicz::NormalizedMeasure;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate triplets.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let span = self.indptr[r]..self.indptr[r + 1];
            *out = self.indices[span.clone()].iter().zip(&self.values[span]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unnormalized element matrix of one cell; corners ordered `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`.
///
/// Each corner contributes `¼ gᵀAg` with `g` the pair of edge differences through that corner,
/// which is independent of `h` in two dimensions.
pub fn cell_matrix(a: Sym2) -> [[f64; 4]; 4] {
    cell_matrix_cut(a, [1.0; 4])
}

/// As [`cell_matrix`] for edges cut by the boundary after the fractions `θ` (bottom, top,
/// left, right) of their length.
///
/// The slope along a cut edge is `Δ/(θh)` and it acts over length `θh`, so the difference
/// enters the energy scaled by `1/√θ`.
pub fn cell_matrix_cut(a: Sym2, theta: [f64; 4]) -> [[f64; 4]; 4] {
    let edge = |e: [f64; 4], t: f64| e.map(|v| v / t.sqrt());
    let bottom = edge([-1.0, 1.0, 0.0, 0.0], theta[0]);
    let top = edge([0.0, 0.0, -1.0, 1.0], theta[1]);
    let left = edge([-1.0, 0.0, 1.0, 0.0], theta[2]);
    let right = edge([0.0, -1.0, 0.0, 1.0], theta[3]);
    let corners = [(bottom, left), (bottom, right), (top, left), (top, right)];
    let mut k = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in p..4 {
            let mut s = 0.0;
            for (gx, gy) in corners {
                s += 0.25 * a.bilinear([gx[p], gy[p]], [gx[q], gy[q]]);
            }
            k[p][q] = s;
            k[q][p] = s;
        }
    }
    k
}

/// Element matrix of the cell with lower-left node `c`, including boundary cut fractions.
fn element(a: &MatrixField, mask: &DomainMask, grid: &Grid, c: usize) -> [[f64; 4]; 4] {
    let (x, y) = grid.point(c);
    let am = a.eval(x + 0.5 * grid.h, y + 0.5 * grid.h);
    let theta = [mask.edge_fraction(c, 0), mask.edge_fraction(c + grid.n, 0), mask.edge_fraction(c, 1), mask.edge_fraction(c + 1, 1)];
    cell_matrix_cut(am, theta)
}

/// Grid node to unknown numbering over the interior of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    to_dof: Vec<Option<usize>>,
    to_node: Vec<usize>,
}

impl DofMap {
    pub fn new(mask: &DomainMask, grid: &Grid) -> Self {
        let mut to_dof = vec![None; grid.len()];
        let mut to_node = Vec::new();
        for k in (0..grid.len()).filter(|&k| mask.is_interior(k)) {
            to_dof[k] = Some(to_node.len());
            to_node.push(k);
        }
        Self { to_dof, to_node }
    }

    pub fn len(&self) -> usize {
        self.to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_node.is_empty()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.to_dof[node]
    }

    pub fn node(&self, dof: usize) -> usize {
        self.to_node[dof]
    }

    /// Restriction of a full-grid field to the unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.to_node.iter().map(|&k| full[k]).collect()
    }

    /// Extension by zero to the whole grid.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.to_dof.len()];
        for (d, &k) in self.to_node.iter().enumerate() {
            out[k] = x[d];
        }
        out
    }
}

/// `∇·A∇u = f` on a masked grid.
#[derive(Debug, Clone)]
pub struct WeakProblem {
    pub a: MatrixField,
    /// Nodal values of `f` on the whole grid.
    pub f: Vec<f64>,
    pub mask: DomainMask,
    pub grid: Grid,
    pub mu: NormalizedMeasure,
}

impl WeakProblem {
    pub fn new(a: MatrixField, f: Vec<f64>, mask: DomainMask, grid: Grid) -> Result<Self> {
        if f.len() != grid.len() {
            return Err(Error::invalid("load field length does not match grid"));
        }
        if let Some(k) = (0..grid.len()).find(|&k| mask.contains(k) && !f[k].is_finite()) {
            return Err(Error::invalid(format!("load is not finite at node {k}")));
        }
        a.check_psd(&grid)?;
        let mu = mask.measure(&grid)?;
        Ok(Self { a, f, mask, grid, mu })
    }

    pub fn with_load(&self, f: Vec<f64>) -> Result<Self> {
        Self::new(self.a.clone(), f, self.mask.clone(), self.grid)
    }
}

/// Assembled operator: `K` over interior unknowns, the lumped mass and the numbering.
#[derive(Debug, Clone)]
pub struct Stiffness {
    pub k: CsrMatrix,
    /// Diagonal mass `M_ii = μ_i`.
    pub mass: Vec<f64>,
    pub dofs: DofMap,
    /// Lebesgue area of the discrete domain (the normalization of `dμ`).
    pub area: f64,
}

impl Stiffness {
    pub fn mass_quad(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum()
    }

    /// `‖u‖²_{W^{1,2}_A} = uᵀMu + uᵀKu` for unknown vectors.
    pub fn norm2(&self, x: &[f64]) -> f64 {
        self.mass_quad(x) + self.k.quad(x)
    }
}

/// Assembles the operator only (no load).
pub fn assemble_operator(a: &MatrixField, mask: &DomainMask, grid: &Grid) -> Result<Stiffness> {
    let dofs = DofMap::new(mask, grid);
    if dofs.is_empty() {
        return Err(Error::invalid("domain has no interior nodes"));
    }
    let area = mask.area(grid);
    let mu = mask.measure(grid)?;
    let mut trip = Vec::with_capacity(16 * dofs.len());
    for c in mask.active_cells(grid) {
        let corners = [c, c + 1, c + grid.n, c + grid.n + 1];
        if corners.iter().all(|&k| dofs.dof(k).is_none()) {
            continue;
        }
        let kl = element(a, mask, grid, c);
        for p in 0..4 {
            let Some(r) = dofs.dof(corners[p]) else { continue };
            for q in 0..4 {
                let Some(s) = dofs.dof(corners[q]) else { continue };
                if kl[p][q] != 0.0 || p == q {
                    trip.push((r, s, kl[p][q] / area));
                }
            }
        }
    }
    let k = CsrMatrix::from_triplets(dofs.len(), trip);
    let mass = dofs.to_node.iter().map(|&n| mu.weights()[n]).collect();
    Ok(Stiffness { k, mass, dofs, area })
}

/// `K` and the load `b_i = −∫ f φ_i dμ`.
pub fn assemble(problem: &WeakProblem) -> Result<(Stiffness, Vec<f64>)> {
    let st = assemble_operator(&problem.a, &problem.mask, &problem.grid)?;
    let b = st.dofs.to_node.iter().zip(&st.mass).map(|(&k, m)| -problem.f[k] * m).collect();
    Ok((st, b))
}

/// `∫ ∇u·A∇v dμ` for full-grid fields over the active cells (boundary values included).
pub fn energy_form(u: &[f64], v: &[f64], a: &MatrixField, mask: &DomainMask, grid: &Grid) -> f64 {
    let area = mask.area(grid);
    let mut acc = 0.0;
    for c in mask.active_cells(grid) {
        let corners = [c, c + 1, c + grid.n, c + grid.n + 1];
        let ul = corners.map(|k| u[k]);
        let vl = corners.map(|k| v[k]);
        if ul.iter().all(|x| *x == 0.0) || vl.iter().all(|x| *x == 0.0) {
            continue;
        }
        let kl = element(a, mask, grid, c);
        for p in 0..4 {
            for q in 0..4 {
                acc += ul[p] * kl[p][q] * vl[q];
            }
        }
    }
    acc / area
}

/// `∫ F dμ` by the stiffness quadrature: every active cell corner contributes a quarter cell
/// with `F(node, gradients, A)`, where `gradients[i]` is the corner gradient of `fields[i]`
/// built from the edge differences through that corner (cut edges scaled as in the stiffness).
///
/// With one field and `F = gᵀAg` this reproduces [`energy`].
pub fn corner_integral(
    fields: &[&[f64]],
    a: &MatrixField,
    mask: &DomainMask,
    grid: &Grid,
    mut f: impl FnMut(usize, &[[f64; 2]], Sym2) -> f64,
) -> f64 {
    let area = mask.area(grid);
    let mut grads = vec![[0.0; 2]; fields.len()];
    let mut acc = 0.0;
    for c in mask.active_cells(grid) {
        let nodes = [c, c + 1, c + grid.n, c + grid.n + 1];
        let (x, y) = grid.point(c);
        let am = a.eval(x + 0.5 * grid.h, y + 0.5 * grid.h);
        let scale = [mask.edge_fraction(c, 0), mask.edge_fraction(c + grid.n, 0), mask.edge_fraction(c, 1), mask.edge_fraction(c + 1, 1)]
            .map(|t| 1.0 / (grid.h * t.sqrt()));
        for (p, &node) in nodes.iter().enumerate() {
            for (g, u) in grads.iter_mut().zip(fields) {
                let bottom = (u[nodes[1]] - u[nodes[0]]) * scale[0];
                let top = (u[nodes[3]] - u[nodes[2]]) * scale[1];
                let left = (u[nodes[2]] - u[nodes[0]]) * scale[2];
                let right = (u[nodes[3]] - u[nodes[1]]) * scale[3];
                *g = match p {
                    0 => [bottom, left],
                    1 => [bottom, right],
                    2 => [top, left],
                    _ => [top, right],
                };
            }
            acc += f(node, &grads, am);
        }
    }
    acc * 0.25 * grid.h * grid.h / area
}

/// `∫ |∇_A u|² dμ` in the element sense.
pub fn energy(u: &[f64], a: &MatrixField, mask: &DomainMask, grid: &Grid) -> f64 {
    energy_form(u, u, a, mask, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for `Kx = b`, starting from `x`.
///
/// Stops when `‖b − Kx‖₂ ≤ tol·‖b‖₂`.
pub fn pcg(k: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> CgOutcome {
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut total = 0;
    let mut rel = f64::INFINITY;
    // restarts recompute the true residual, which drifts from the recurrence near the tolerance
    for _ in 0..4 {
        let (it, r) = pcg_pass(k, b, &inv_diag, x, tol * bn, max_iter - total);
        total += it;
        rel = r / bn;
        if rel <= tol || total >= max_iter {
            break;
        }
    }
    CgOutcome { iterations: total, relative_residual: rel, converged: rel <= tol }
}

/// One CG run from `x`; returns iterations and the true residual norm at exit.
fn pcg_pass(k: &CsrMatrix, b: &[f64], inv_diag: &[f64], x: &mut [f64], abs_tol: f64, max_iter: usize) -> (usize, f64) {
    let n = k.dim();
    let mut r = k.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let mut it = 0;
    // aim a little below the target so the true residual usually passes first time
    while norm(&r) > 0.5 * abs_tol && it < max_iter {
        k.matvec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            break;
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    let kx = k.matvec(x);
    let res = b.iter().zip(&kx).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    (it, res)
}

fn default_max_iter(n: usize) -> usize {
    (20 * n).max(1000)
}

/// Smallest generalized eigenvalue of `(K, M)` and the Poincaré constant `C = 1/λ_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    pub constant: f64,
    pub lambda_min: f64,
    pub iterations: usize,
}

pub fn poincare_from_stiffness(st: &Stiffness) -> Result<PoincareEstimate> {
    let n = st.dofs.len();
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    let max_iter = default_max_iter(n);
    for it in 1..=200 {
        let mx: Vec<f64> = x.iter().zip(&st.mass).map(|(v, m)| v * m).collect();
        // warm start from the previous direction scaled by the current eigenvalue guess
        for i in 0..n {
            y[i] = if lambda.is_finite() { x[i] / lambda } else { 0.0 };
        }
        let out = pcg(&st.k, &mx, &mut y, 1e-12, max_iter);
        let kq = st.k.quad(&y);
        let mq = st.mass_quad(&y);
        let ritz = kq / mq;
        if !out.converged || !(ritz > 1e-12) {
            return Err(Error::NonCoercive { ritz: if ritz.is_finite() { ritz } else { 0.0 } });
        }
        let s = mq.sqrt();
        x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / s);
        let done = (lambda - ritz).abs() <= 1e-11 * ritz;
        lambda = ritz;
        if done {
            return Ok(PoincareEstimate { constant: 1.0 / lambda, lambda_min: lambda, iterations: it });
        }
    }
    Ok(PoincareEstimate { constant: 1.0 / lambda, lambda_min: lambda, iterations: 200 })
}

/// `C(Ω) = 1/λ_min(K, M)` by inverse power iteration.
pub fn poincare_constant(a: &MatrixField, mask: &DomainMask, grid: &Grid) -> Result<PoincareEstimate> {
    poincare_from_stiffness(&assemble_operator(a, mask, grid)?)
}

/// `β = min(1/(2C), 1/2)`.
pub fn beta_from_poincare(c: f64) -> f64 {
    (0.5 / c).min(0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaxMilgram {
    pub alpha: f64,
    pub beta: f64,
    pub poincare_c: f64,
    /// `min (B[u,u] − β‖u‖²)` over the samples, each with `‖u‖ = 1`.
    pub coercivity_slack: f64,
    /// `min (‖u‖‖v‖ − |B[u,v]|)` over sampled pairs of unit vectors.
    pub boundedness_slack: f64,
    pub samples: usize,
}

/// Random unknown vectors normalized in `W^{1,2}_A`: half white noise, half smooth modes.
pub fn random_unit_fields(st: &Stiffness, grid: &Grid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|s| {
            let mut u: Vec<f64> = if s % 2 == 0 {
                (0..st.dofs.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
            } else {
                let (kx, ky) = (rng.gen_range(1..4) as f64, rng.gen_range(1..4) as f64);
                let (px, py) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));
                (0..st.dofs.len())
                    .map(|d| {
                        let (x, y) = grid.point(st.dofs.node(d));
                        (kx * x + px).sin() * (ky * y + py).cos() + 0.1 * rng.gen_range(-1.0..1.0)
                    })
                    .collect()
            };
            let n = st.norm2(&u).sqrt();
            u.iter_mut().for_each(|v| *v /= n);
            u
        })
        .collect()
}

pub fn lax_milgram_from_stiffness(
    st: &Stiffness,
    grid: &Grid,
    poincare: &PoincareEstimate,
    samples: usize,
    seed: u64,
) -> Result<LaxMilgram> {
    let beta = beta_from_poincare(poincare.constant);
    let us = random_unit_fields(st, grid, samples, seed);
    let mut coercivity_slack = f64::INFINITY;
    let mut boundedness_slack = f64::INFINITY;
    for (i, u) in us.iter().enumerate() {
        let buu = st.k.quad(u);
        coercivity_slack = coercivity_slack.min(buu - beta * st.norm2(u));
        let v = &us[(i + 1) % us.len()];
        let buv = dot(u, &st.k.matvec(v));
        boundedness_slack = boundedness_slack.min((st.norm2(u) * st.norm2(v)).sqrt() - buv.abs());
    }
    if coercivity_slack < -1e-8 {
        return Err(Error::Inconsistency(format!("coercivity check failed with slack {coercivity_slack:e}")));
    }
    if boundedness_slack < -1e-8 {
        return Err(Error::Inconsistency(format!("boundedness check failed with slack {boundedness_slack:e}")));
    }
    Ok(LaxMilgram { alpha: 1.0, beta, poincare_c: poincare.constant, coercivity_slack, boundedness_slack, samples })
}

pub fn lax_milgram_constants(a: &MatrixField, mask: &DomainMask, grid: &Grid) -> Result<LaxMilgram> {
    let st = assemble_operator(a, mask, grid)?;
    let p = poincare_from_stiffness(&st)?;
    lax_milgram_from_stiffness(&st, grid, &p, 50, 7)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub alpha_est: f64,
    pub beta_est: f64,
    pub poincare_c: f64,
    pub unknowns: usize,
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

/// Solves and returns the full-grid field (zero off the interior) with its report.
pub fn solve_dirichlet(problem: &WeakProblem, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    solve_dirichlet_from(problem, SolveOptions { tol, ..Default::default() }, None)
}

pub fn solve_dirichlet_from(problem: &WeakProblem, opts: SolveOptions, initial: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    let (st, b) = assemble(problem)?;
    let poincare = poincare_from_stiffness(&st)?;
    let beta = beta_from_poincare(poincare.constant);
    if beta <= opts.tol {
        return Err(Error::NonCoercive { ritz: poincare.lambda_min });
    }
    let mut x = initial.map_or_else(|| vec![0.0; st.dofs.len()], |u| st.dofs.restrict(u));
    let out = pcg(&st.k, &b, &mut x, opts.tol, opts.max_iter.unwrap_or_else(|| default_max_iter(st.dofs.len())));
    if !out.converged {
        return Err(Error::NonCoercive { ritz: poincare.lambda_min });
    }
    let report = SolveReport {
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        alpha_est: 1.0,
        beta_est: beta,
        poincare_c: poincare.constant,
        unknowns: st.dofs.len(),
        n: problem.grid.n,
        h: problem.grid.h,
    };
    Ok((st.dofs.extend(&x), report))
}

/// `max_φ |∫∇u·A∇φ dμ + ∫fφ dμ| / ‖φ‖_{W^{1,2}_A}` over hat functions at the given nodes
/// (all interior nodes when `tests` is `None`).
pub fn weak_residual(u: &[f64], problem: &WeakProblem, tests: Option<&[usize]>) -> Result<f64> {
    let (st, b) = assemble(problem)?;
    let x = st.dofs.restrict(u);
    let kx = st.k.matvec(&x);
    let all: Vec<usize>;
    let nodes = match tests {
        Some(t) => t,
        None => {
            all = st.dofs.to_node.clone();
            &all
        }
    };
    let mut worst: f64 = 0.0;
    for &k in nodes {
        let d = st.dofs.dof(k).ok_or_else(|| Error::invalid(format!("test node {k} is not interior")))?;
        let phi_norm = (st.mass[d] + st.k.get(d, d)).sqrt();
        worst = worst.max((kx[d] - b[d]).abs() / phi_norm);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, GProfile};
    use approx::assert_relative_eq;

    fn disk(n: usize) -> (Grid, DomainMask) {
        let d = Domain::Disk { radius: 1.0 };
        let g = d.grid(n).unwrap();
        let m = d.mask(&g).unwrap();
        (g, m)
    }

    fn square(n: usize) -> (Grid, DomainMask) {
        let d = Domain::Square { side: 1.0 };
        let g = d.grid(n).unwrap();
        let m = d.mask(&g).unwrap();
        (g, m)
    }

    #[test]
    fn identity_gives_five_point_stencil() {
        let (g, m) = square(9);
        let st = assemble_operator(&MatrixField::identity(), &m, &g).unwrap();
        assert!(st.k.is_symmetric());
        let c = st.dofs.dof(g.index(4, 4)).unwrap();
        let scale = st.area;
        let row: Vec<(usize, f64)> = st.k.row(c).map(|(j, v)| (j, v * scale)).collect();
        assert_eq!(row.len(), 5);
        for (j, v) in row {
            let want = if j == c { 4.0 } else { -1.0 };
            assert_relative_eq!(v, want, epsilon = 1e-12);
        }
        // the same row scaled by measure weights: μ_i = h²/area at interior nodes
        assert_relative_eq!(st.mass[c], g.h * g.h / st.area, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_direction_couples_only_x_neighbours() {
        let (g, m) = square(9);
        let st = assemble_operator(&MatrixField::constant(Sym2::diag(1.0, 0.0)), &m, &g).unwrap();
        for r in 0..st.dofs.len() {
            let (i, j) = g.ij(st.dofs.node(r));
            for (c, v) in st.k.row(r) {
                let (ci, cj) = g.ij(st.dofs.node(c));
                if c != r && v != 0.0 {
                    assert_eq!(cj, j);
                    assert_eq!(ci.abs_diff(i), 1);
                }
            }
        }
    }

    #[test]
    fn zero_load_gives_zero_rhs_and_solution() {
        let (g, m) = disk(17);
        let p = WeakProblem::new(MatrixField::identity(), vec![0.0; g.len()], m, g).unwrap();
        let (_, b) = assemble(&p).unwrap();
        assert!(b.iter().all(|v| *v == 0.0));
        let (u, _) = solve_dirichlet(&p, 1e-10).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn poisson_disk_matches_paraboloid() {
        let (g, m) = disk(65);
        let p = WeakProblem::new(MatrixField::identity(), vec![-1.0; g.len()], m.clone(), g).unwrap();
        let (u, rep) = solve_dirichlet(&p, 1e-10).unwrap();
        assert!(rep.relative_residual <= 1e-10);
        let c = g.nearest(0.0, 0.0).unwrap();
        assert!((u[c] - 0.25).abs() < 2e-4, "centre {}", u[c]);
        assert!(weak_residual(&u, &p, None).unwrap() <= 10.0 * 1e-10);
    }

    #[test]
    fn poincare_oracles() {
        let (g, m) = square(65);
        let p = poincare_constant(&MatrixField::identity(), &m, &g).unwrap();
        let exact = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!((p.constant - exact).abs() <= 0.05 * exact, "{}", p.constant);
        let p4 = poincare_constant(&MatrixField::identity().scaled(4.0), &m, &g).unwrap();
        assert_relative_eq!(p4.constant, p.constant / 4.0, max_relative = 1e-9);
        let (g, m) = disk(65);
        let p = poincare_constant(&MatrixField::identity(), &m, &g).unwrap();
        let j0 = 2.404_825_557_695_773_f64;
        assert!((p.constant - 1.0 / (j0 * j0)).abs() <= 0.05 / (j0 * j0), "{}", p.constant);
    }

    #[test]
    fn cut_fractions_reach_the_circle() {
        let (g, m) = disk(33);
        let mut cut = 0;
        for k in 0..g.len() {
            for dir in 0..2 {
                let t = m.edge_fraction(k, dir);
                assert!(t > 0.0 && t <= 1.0);
                if t < 1.0 {
                    cut += 1;
                    let nb = if dir == 0 { k + 1 } else { k + g.n };
                    let inner = if m.is_interior(k) { k } else { nb };
                    let (x, y) = g.point(inner);
                    let s = if inner == k { t * g.h } else { -t * g.h };
                    let (px, py) = if dir == 0 { (x + s, y) } else { (x, y + s) };
                    assert_relative_eq!(px.hypot(py), 1.0, max_relative = 1e-9);
                }
            }
        }
        assert!(cut > 0);
        let (g, m) = square(17);
        assert!((0..g.len()).all(|k| m.edge_fraction(k, 0) == 1.0 && m.edge_fraction(k, 1) == 1.0));
    }

    #[test]
    fn beta_formula() {
        assert_eq!(beta_from_poincare(1.0), 0.5);
        assert_eq!(beta_from_poincare(4.0), 0.125);
        assert_eq!(beta_from_poincare(0.1), 0.5);
    }

    #[test]
    fn lax_milgram_random_checks() {
        let (g, m) = disk(33);
        for a in [MatrixField::identity(), MatrixField::grushin()] {
            let lm = lax_milgram_constants(&a, &m, &g).unwrap();
            assert_eq!(lm.alpha, 1.0);
            assert!(lm.coercivity_slack >= -1e-8);
            assert!(lm.boundedness_slack >= -1e-8);
        }
    }

    #[test]
    fn weak_residual_examples() {
        let (g, m) = disk(17);
        let p = WeakProblem::new(MatrixField::identity(), vec![-1.0; g.len()], m, g).unwrap();
        let zero = vec![0.0; g.len()];
        let (st, _) = assemble(&p).unwrap();
        let r0 = weak_residual(&zero, &p, None).unwrap();
        let want = (0..st.dofs.len()).map(|d| st.mass[d] / (st.mass[d] + st.k.get(d, d)).sqrt()).fold(0.0, f64::max);
        assert_relative_eq!(r0, want, max_relative = 1e-12);
        let (u, _) = solve_dirichlet(&p, 1e-12).unwrap();
        let c = g.nearest(0.0, 0.0).unwrap();
        let at = |delta: f64| {
            let mut v = u.clone();
            v[c] += delta;
            weak_residual(&v, &p, Some(&[c])).unwrap()
        };
        let (r1, r2) = (at(1e-3), at(2e-3));
        assert_relative_eq!(r2 / r1, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn different_initial_guesses_agree() {
        let (g, m) = disk(33);
        let p = WeakProblem::new(MatrixField::grushin(), vec![-1.0; g.len()], m.clone(), g).unwrap();
        let opts = SolveOptions { tol: 1e-10, max_iter: None };
        let (u1, _) = solve_dirichlet_from(&p, opts, None).unwrap();
        let guess = g.sample(|x, y| x * y + 1.0);
        let (u2, _) = solve_dirichlet_from(&p, opts, Some(&guess)).unwrap();
        let d: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
        let e = energy(&d, &p.a, &m, &g).sqrt();
        let scale = energy(&u1, &p.a, &m, &g).sqrt();
        assert!(e <= 10.0 * 1e-10 * scale.max(1.0) * 100.0, "{e}");
    }

    #[test]
    fn maximum_principle_for_diagonal_fields() {
        let (g, m) = disk(33);
        for a in [MatrixField::identity(), MatrixField::grushin(), MatrixField::diag_g(GProfile::Power(2.0))] {
            let f = g.sample(|x, y| -(1.0 + x * x + 0.5 * y));
            let f: Vec<f64> = f.iter().map(|v| v.min(0.0)).collect();
            let p = WeakProblem::new(a, f, m.clone(), g).unwrap();
            let (u, _) = solve_dirichlet(&p, 1e-10).unwrap();
            assert!(u.iter().all(|v| *v >= -1e-9));
        }
    }

    #[test]
    fn energy_form_matches_assembled_matrix() {
        let (g, m) = disk(17);
        let a = MatrixField::constant(Sym2 { a11: 2.0, a12: 0.7, a22: 1.0 });
        let st = assemble_operator(&a, &m, &g).unwrap();
        let us = random_unit_fields(&st, &g, 4, 3);
        for u in &us {
            let full = st.dofs.extend(u);
            assert_relative_eq!(energy(&full, &a, &m, &g), st.k.quad(u), max_relative = 1e-12);
        }
        assert!(st.k.is_symmetric());
        assert!(us.iter().all(|u| st.k.quad(u) >= -1e-14));
    }

    #[test]
    fn corner_integral_reproduces_energy() {
        let (g, m) = disk(17);
        let a = MatrixField::constant(Sym2 { a11: 1.5, a12: -0.4, a22: 0.8 });
        let u = g.sample(|x, y| if x * x + y * y < 0.99 { (x + 0.3) * (1.0 - x * x - y * y) } else { 0.0 });
        let u = DofMap::new(&m, &g).extend(&DofMap::new(&m, &g).restrict(&u));
        let e = corner_integral(&[&u], &a, &m, &g, |_, gr, am| am.quad(gr[0]));
        assert_relative_eq!(e, energy(&u, &a, &m, &g), max_relative = 1e-12);
        let one = corner_integral(&[], &a, &m, &g, |_, _, _| 1.0);
        assert_relative_eq!(one, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn grushin_centre_value_stabilizes() {
        let mut prev: Option<f64> = None;
        for n in [65, 129] {
            let (g, m) = disk(n);
            let p = WeakProblem::new(MatrixField::grushin(), vec![-1.0; g.len()], m, g).unwrap();
            let (u, _) = solve_dirichlet(&p, 1e-10).unwrap();
            let mx = u.iter().copied().fold(0.0, f64::max);
            if let Some(q) = prev {
                assert!(((mx - q) / mx).abs() <= 0.02, "{q} -> {mx}");
            }
            prev = Some(mx);
        }
    }
}
