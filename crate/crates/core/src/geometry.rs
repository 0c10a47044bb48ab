//! Grids, masked domains, matrix fields, the A-gradient and subunit distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counterexamples::VanishingProfile;
use crate::error::{Error, Result};
use crate::orlicz::NormalizedMeasure;
use crate::young::split_call;

/// Uniform `n × n` node lattice over a square `[x0, x0 + side] × [y0, y0 + side]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub side: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(x0: f64, y0: f64, side: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(format!("grid needs at least 3 nodes per side, got {n}")));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::invalid("grid side must be positive"));
        }
        Ok(Self { x0, y0, side, n, h: side / (n - 1) as f64 })
    }

    /// Grid on `[-half, half]²`.
    pub fn centered(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, -half, 2.0 * half, n)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.x(i), self.y(j))
    }

    /// Node closest to `(x, y)`, or `None` outside the grid rectangle (with half a cell of slack).
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let fi = ((x - self.x0) / self.h).round();
        let fj = ((y - self.y0) / self.h).round();
        let top = (self.n - 1) as f64;
        if !(0.0..=top).contains(&fi) || !(0.0..=top).contains(&fj) {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }

    /// Indices of the (up to) 8 neighbours of `idx` with their lattice offsets.
    pub fn neighbours8(&self, idx: usize) -> impl Iterator<Item = (usize, i32, i32)> + '_ {
        const OFFS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        self.offsets(idx, &OFFS)
    }

    /// The 8 neighbours plus the 8 knight moves `(±1, ±2), (±2, ±1)`.
    pub fn neighbours16(&self, idx: usize) -> impl Iterator<Item = (usize, i32, i32)> + '_ {
        const OFFS: [(i32, i32); 16] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
            (1, 2),
            (2, 1),
            (-1, 2),
            (-2, 1),
            (1, -2),
            (2, -1),
            (-1, -2),
            (-2, -1),
        ];
        self.offsets(idx, &OFFS)
    }

    fn offsets<'a>(&'a self, idx: usize, offs: &'static [(i32, i32)]) -> impl Iterator<Item = (usize, i32, i32)> + 'a {
        let (i, j) = self.ij(idx);
        let n = self.n as i64;
        offs.iter().filter_map(move |&(di, dj)| {
            let (a, b) = (i as i64 + di as i64, j as i64 + dj as i64);
            (a >= 0 && b >= 0 && a < n && b < n).then(|| (self.index(a as usize, b as usize), di, dj))
        })
    }
}

/// Domain shapes, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Disk { radius: f64 },
    Square { side: f64 },
}

impl Domain {
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = split_call(spec.trim()).ok_or_else(|| Error::Config(format!("unrecognised domain `{spec}`")))?;
        let v: f64 = arg.trim().parse().map_err(|_| Error::Config(format!("bad number in domain `{spec}`")))?;
        if !(v > 0.0) {
            return Err(Error::Config(format!("domain size must be positive in `{spec}`")));
        }
        match head {
            "disk" => Ok(Domain::Disk { radius: v }),
            "square" => Ok(Domain::Square { side: v }),
            _ => Err(Error::Config(format!("unknown domain `{head}`"))),
        }
    }

    /// Tight grid with `n` nodes per side.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        match *self {
            Domain::Disk { radius } => Grid::centered(radius, n),
            Domain::Square { side } => Grid::centered(0.5 * side, n),
        }
    }

    pub fn mask(&self, grid: &Grid) -> Result<DomainMask> {
        match *self {
            Domain::Disk { radius } => {
                let r2 = radius * radius;
                let interior = (0..grid.len())
                    .map(|k| {
                        let (i, j) = grid.ij(k);
                        let (x, y) = grid.point(k);
                        let edge = i == 0 || j == 0 || i + 1 == grid.n || j + 1 == grid.n;
                        !edge && x * x + y * y < r2 * (1.0 - 1e-12)
                    })
                    .collect();
                let mask = DomainMask::from_interior(grid, interior)?;
                // distance to the circle along the edge, in units of h
                Ok(mask.with_edge_fractions(grid, |(x, y), (dx, dy)| {
                    let b = x * dx + y * dy;
                    let c = x * x + y * y - r2;
                    let t = -b + (b * b - c).sqrt();
                    t / grid.h
                }))
            }
            Domain::Square { .. } => {
                let interior = (0..grid.len())
                    .map(|k| {
                        let (i, j) = grid.ij(k);
                        i > 0 && j > 0 && i + 1 < grid.n && j + 1 < grid.n
                    })
                    .collect();
                DomainMask::from_interior(grid, interior)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Domain::Disk { radius } => format!("disk({radius})"),
            Domain::Square { side } => format!("square({side})"),
        }
    }
}

/// Interior (unknown) nodes plus the ring of boundary nodes around them.
///
/// Optionally records, for grid edges from an interior node to a boundary node, the
/// fraction `θ ∈ (0, 1]` of the edge that lies inside the true domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    interior: Vec<bool>,
    boundary: Vec<bool>,
    /// `[x-edge to k+1, y-edge to k+n]` per node; empty when every fraction is 1.
    fractions: Vec<[f64; 2]>,
}

/// Cut fractions below this are clamped, which pins such nodes close to zero anyway.
const MIN_FRACTION: f64 = 1e-3;

impl DomainMask {
    /// Boundary = nodes outside the interior that are 8-neighbours of it.
    pub fn from_interior(grid: &Grid, interior: Vec<bool>) -> Result<Self> {
        let mask = Self::from_interior_unchecked(grid, interior)?;
        if mask.interior_count() == 0 {
            return Err(Error::invalid("domain mask has no interior nodes"));
        }
        Ok(mask)
    }

    /// As `from_interior` but allows an empty mask (subunit balls of radius zero).
    pub fn from_interior_unchecked(grid: &Grid, interior: Vec<bool>) -> Result<Self> {
        if interior.len() != grid.len() {
            return Err(Error::invalid("mask length does not match grid"));
        }
        let mut boundary = vec![false; grid.len()];
        for k in (0..grid.len()).filter(|&k| interior[k]) {
            for (nb, _, _) in grid.neighbours8(k) {
                if !interior[nb] {
                    boundary[nb] = true;
                }
            }
        }
        Ok(Self { interior, boundary, fractions: Vec::new() })
    }

    /// Fills the cut fractions; `frac(p, d)` is the distance from interior point `p` to the
    /// boundary along unit direction `d`, in units of `h`.
    #[allow(clippy::needless_range_loop)]
    pub fn with_edge_fractions(mut self, grid: &Grid, frac: impl Fn((f64, f64), (f64, f64)) -> f64) -> Self {
        let mut fr = vec![[1.0; 2]; grid.len()];
        let mut any = false;
        for k in 0..grid.len() {
            let (i, j) = grid.ij(k);
            let nbs = [(i + 1 < grid.n, k + 1, (1.0, 0.0)), (j + 1 < grid.n, k + grid.n, (0.0, 1.0))];
            for (dir, (ok, nb, d)) in nbs.into_iter().enumerate() {
                if !ok {
                    continue;
                }
                let (inner, sign) = match (self.interior[k], self.interior[nb]) {
                    (true, false) if self.boundary[nb] => (k, 1.0),
                    (false, true) if self.boundary[k] => (nb, -1.0),
                    _ => continue,
                };
                let t = frac(grid.point(inner), (sign * d.0, sign * d.1));
                if t.is_finite() && t < 1.0 {
                    fr[k][dir] = t.max(MIN_FRACTION);
                    any = true;
                }
            }
        }
        if any {
            self.fractions = fr;
        }
        self
    }

    /// Fraction of the edge from `k` to `k+1` (`dir = 0`) or `k+n` (`dir = 1`) inside the domain.
    pub fn edge_fraction(&self, k: usize, dir: usize) -> f64 {
        self.fractions.get(k).map_or(1.0, |f| f[dir])
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    /// Interior or boundary.
    pub fn contains(&self, k: usize) -> bool {
        self.interior[k] || self.boundary[k]
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.interior_count() == 0
    }

    pub fn interior_flags(&self) -> &[bool] {
        &self.interior
    }

    /// Lower-left corners of cells whose four corners all lie in the mask.
    pub fn active_cells<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = usize> + 'a {
        (0..grid.len()).filter(move |&k| {
            let (i, j) = grid.ij(k);
            i + 1 < grid.n
                && j + 1 < grid.n
                && self.contains(k)
                && self.contains(k + 1)
                && self.contains(k + grid.n)
                && self.contains(k + grid.n + 1)
        })
    }

    /// Lebesgue area of the active cells.
    pub fn area(&self, grid: &Grid) -> f64 {
        self.active_cells(grid).count() as f64 * grid.h * grid.h
    }

    /// Normalized vertex-quadrature weights: each active cell gives a quarter of its area to each corner.
    pub fn measure(&self, grid: &Grid) -> Result<NormalizedMeasure> {
        let mut w = vec![0.0; grid.len()];
        let q = 0.25 * grid.h * grid.h;
        for k in self.active_cells(grid) {
            for c in [k, k + 1, k + grid.n, k + grid.n + 1] {
                w[c] += q;
            }
        }
        NormalizedMeasure::normalized(w)
    }

    /// Lattice extent `(x-extent, y-extent)` of the interior nodes in node counts, from `centre`.
    pub fn extents_from(&self, grid: &Grid, centre: usize) -> (usize, usize) {
        let (ci, cj) = grid.ij(centre);
        let mut ex = 0;
        let mut ey = 0;
        for k in (0..grid.len()).filter(|&k| self.interior[k]) {
            let (i, j) = grid.ij(k);
            if j == cj {
                ex = ex.max(i.abs_diff(ci));
            }
            if i == ci {
                ey = ey.max(j.abs_diff(cj));
            }
        }
        (ex, ey)
    }
}

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { a11: 1.0, a12: 0.0, a22: 1.0 };

    pub fn diag(a: f64, b: f64) -> Self {
        Self { a11: a, a12: 0.0, a22: b }
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a11 * v[0] * v[0] + 2.0 * self.a12 * v[0] * v[1] + self.a22 * v[1] * v[1]
    }

    pub fn bilinear(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        self.a11 * u[0] * v[0] + self.a12 * (u[0] * v[1] + u[1] * v[0]) + self.a22 * u[1] * v[1]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { a11: c * self.a11, a12: c * self.a12, a22: c * self.a22 }
    }

    /// Eigenvalues ascending with the unit eigenvector of the smaller one.
    pub fn eigen(&self) -> ([f64; 2], [f64; 2]) {
        let (a, b, d) = (self.a11, self.a12, self.a22);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let lo = mean - rad;
        let hi = mean + rad;
        let v = if b == 0.0 {
            if a <= d {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        } else {
            let (x, y) = (b, lo - a);
            let n = x.hypot(y);
            [x / n, y / n]
        };
        ([lo, hi], v)
    }

    /// Symmetric square root `B` with `BᵀB = A`; diagonal input gives the exact diagonal root.
    pub fn sqrt(&self) -> [[f64; 2]; 2] {
        if self.a12 == 0.0 {
            return [[self.a11.max(0.0).sqrt(), 0.0], [0.0, self.a22.max(0.0).sqrt()]];
        }
        let ([l1, l2], v) = self.eigen();
        let (s1, s2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
        let w = [-v[1], v[0]];
        let mut b = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                b[r][c] = s1 * v[r] * v[c] + s2 * w[r] * w[c];
            }
        }
        b
    }

    /// `dᵀA⁺d`, or infinity when `d` has a component in the kernel of `A`.
    pub fn pinv_quad(&self, d: [f64; 2]) -> f64 {
        let ([l1, l2], v) = self.eigen();
        let scale = l2.abs().max(f64::MIN_POSITIVE);
        let w = [-v[1], v[0]];
        let (c1, c2) = (v[0] * d[0] + v[1] * d[1], w[0] * d[0] + w[1] * d[1]);
        let dn = d[0].hypot(d[1]);
        let mut q = 0.0;
        for (l, c) in [(l1, c1), (l2, c2)] {
            if l > 1e-14 * scale {
                q += c * c / l;
            } else if c.abs() > 1e-12 * dn {
                return f64::INFINITY;
            }
        }
        if l2 <= 0.0 && dn > 0.0 {
            return f64::INFINITY;
        }
        q
    }
}

/// Coefficient profile `g` for `A = diag(1, g(x)²)`, extended evenly in `x`.
#[derive(Clone)]
pub enum GProfile {
    Power(f64),
    ExpAlpha(f64),
    Table(Arc<Table1d>),
}

impl GProfile {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            GProfile::Power(m) => x.powf(*m),
            GProfile::ExpAlpha(alpha) => VanishingProfile::Infinite { alpha: *alpha }.g(x),
            GProfile::Table(t) => t.eval(x),
        }
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = split_call(spec.trim()).ok_or_else(|| Error::Config(format!("unrecognised profile `{spec}`")))?;
        let num = || arg.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number in profile `{spec}`")));
        match head {
            "power" => {
                let m = num()?;
                if !(m >= 0.0) {
                    return Err(Error::Config(format!("power profile needs m >= 0 in `{spec}`")));
                }
                Ok(GProfile::Power(m))
            }
            "exp_alpha" => {
                let a = num()?;
                if !(a > 0.0) {
                    return Err(Error::Config(format!("exp_alpha needs alpha > 0 in `{spec}`")));
                }
                Ok(GProfile::ExpAlpha(a))
            }
            "custom" => Ok(GProfile::Table(Arc::new(Table1d::from_csv(Path::new(arg.trim()), "x", "g")?))),
            _ => Err(Error::Config(format!("unknown profile `{head}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GProfile::Power(m) => format!("power({m})"),
            GProfile::ExpAlpha(a) => format!("exp_alpha({a})"),
            GProfile::Table(t) => format!("custom[{} rows]", t.x.len()),
        }
    }
}

/// Piecewise-linear table with constant extension outside its range.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1d {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Table1d {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::invalid("table needs matching, nonempty columns"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("table abscissae must be strictly increasing"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("table entries must be finite"));
        }
        Ok(Self { x, y })
    }

    pub fn from_csv(path: &Path, xcol: &str, ycol: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let pos = |c: &str| {
            headers.iter().position(|h| h.trim() == c).ok_or_else(|| Error::Config(format!("{}: missing column `{c}`", path.display())))
        };
        let (ix, iy) = (pos(xcol)?, pos(ycol)?);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("{}: bad number on data row {}", path.display(), line + 1)))
            };
            xs.push(get(ix)?);
            ys.push(get(iy)?);
        }
        Self::new(xs, ys).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.x.partition_point(|&v| v <= t);
        if k == 0 {
            return self.y[0];
        }
        if k == self.x.len() {
            return self.y[k - 1];
        }
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let s = (t - x0) / (x1 - x0);
        self.y[k - 1] + s * (self.y[k] - self.y[k - 1])
    }
}

/// Point-evaluable symmetric matrix field `x ↦ A(x)`.
#[derive(Clone)]
pub struct MatrixField {
    name: String,
    f: Arc<dyn Fn(f64, f64) -> Sym2 + Send + Sync>,
    diagonal: bool,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField").field("name", &self.name).finish()
    }
}

impl MatrixField {
    pub fn identity() -> Self {
        Self::constant(Sym2::IDENTITY).named("identity")
    }

    pub fn constant(a: Sym2) -> Self {
        let diagonal = a.a12 == 0.0;
        Self { name: format!("constant[{},{},{}]", a.a11, a.a12, a.a22), f: Arc::new(move |_, _| a), diagonal }
    }

    /// `diag(1, g(x)²)`.
    pub fn diag_g(profile: GProfile) -> Self {
        let name = format!("diag_g({})", profile.name());
        Self {
            name,
            f: Arc::new(move |x, _| {
                let g = profile.eval(x);
                Sym2::diag(1.0, g * g)
            }),
            diagonal: true,
        }
    }

    /// The Grushin field `diag(1, x²)`.
    pub fn grushin() -> Self {
        Self::diag_g(GProfile::Power(1.0))
    }

    pub fn custom(name: &str, f: impl Fn(f64, f64) -> Sym2 + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), f: Arc::new(f), diagonal: false }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        Self { name: format!("{c}*{}", self.name), f: Arc::new(move |x, y| f(x, y).scale(c)), diagonal: self.diagonal }
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "identity" {
            return Ok(Self::identity());
        }
        match split_call(spec) {
            Some(("diag_g", arg)) => Ok(Self::diag_g(GProfile::parse(arg)?)),
            _ => Err(Error::Config(format!("unknown operator `{spec}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Sym2 {
        (self.f)(x, y)
    }

    /// Checks that `A` is PSD (to `-1e-12`) at every node of `grid`.
    pub fn check_psd(&self, grid: &Grid) -> Result<()> {
        for k in 0..grid.len() {
            let (x, y) = grid.point(k);
            let a = self.eval(x, y);
            if ![a.a11, a.a12, a.a22].iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("matrix field is not finite at node {k}")));
            }
            let lo = a.eigen().0[0];
            if lo < -1e-12 {
                return Err(Error::NotPsd { node: k, eigenvalue: lo });
            }
        }
        Ok(())
    }
}

/// Per-node factors `B(x)` with `BᵀB = A(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorField {
    b: Vec<[[f64; 2]; 2]>,
}

impl FactorField {
    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        self.b[k]
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

pub fn factor_matrix_field(a: &MatrixField, grid: &Grid) -> Result<FactorField> {
    a.check_psd(grid)?;
    let b = (0..grid.len())
        .map(|k| {
            let (x, y) = grid.point(k);
            a.eval(x, y).sqrt()
        })
        .collect();
    Ok(FactorField { b })
}

/// Nodal difference gradient on the mask: central where both neighbours are in the mask, one-sided otherwise.
pub fn gradient(u: &[f64], mask: &DomainMask, grid: &Grid) -> Result<Vec<[f64; 2]>> {
    let n = grid.n;
    let mut g = vec![[0.0; 2]; grid.len()];
    for k in (0..grid.len()).filter(|&k| mask.contains(k)) {
        let (i, j) = grid.ij(k);
        let along = |fwd: Option<usize>, bwd: Option<usize>| -> Option<f64> {
            let f = fwd.filter(|&m| mask.contains(m));
            let b = bwd.filter(|&m| mask.contains(m));
            match (f, b) {
                (Some(f), Some(b)) => Some((u[f] - u[b]) / (2.0 * grid.h)),
                (Some(f), None) => Some((u[f] - u[k]) / grid.h),
                (None, Some(b)) => Some((u[k] - u[b]) / grid.h),
                (None, None) => None,
            }
        };
        let gx = along((i + 1 < n).then(|| k + 1), (i > 0).then(|| k - 1));
        let gy = along((j + 1 < n).then(|| k + n), (j > 0).then(|| k - n));
        match (gx, gy) {
            (Some(a), Some(b)) => g[k] = [a, b],
            _ => return Err(Error::Stencil { node: k }),
        }
    }
    Ok(g)
}

/// `∇_A u = B ∇u` at mask nodes (zero elsewhere).
pub fn a_gradient(u: &[f64], factor: &FactorField, mask: &DomainMask, grid: &Grid) -> Result<Vec<[f64; 2]>> {
    let mut g = gradient(u, mask, grid)?;
    for (k, v) in g.iter_mut().enumerate() {
        let b = factor.at(k);
        *v = [b[0][0] * v[0] + b[0][1] * v[1], b[1][0] * v[0] + b[1][1] * v[1]];
    }
    Ok(g)
}

/// `√(∫ u² + |∇_A u|² dμ)` by nodal quadrature.
pub fn w12a_norm(u: &[f64], a: &MatrixField, mu: &NormalizedMeasure, mask: &DomainMask, grid: &Grid) -> Result<f64> {
    let factor = factor_matrix_field(a, grid)?;
    let g = a_gradient(u, &factor, mask, grid)?;
    let dens: Vec<f64> = u.iter().zip(&g).map(|(v, d)| v * v + d[0] * d[0] + d[1] * d[1]).collect();
    Ok(mu.integrate(&dens).sqrt())
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    d: f64,
    k: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then_with(|| other.k.cmp(&self.k))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Subunit travel time of the straight segment `p → q`: midpoint rule on pieces of length
/// at most `h`, each costing `√(dᵀA⁺d)`; infinite once a piece leaves the range of `A`.
pub fn segment_cost(a: &MatrixField, p: (f64, f64), q: (f64, f64), h: f64) -> f64 {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let m = ((dx.hypot(dy) / h) * (1.0 - 1e-12)).ceil().max(1.0);
    let d = [dx / m, dy / m];
    let mut acc = 0.0;
    for i in 0..m as usize {
        let t = (i as f64 + 0.5) / m;
        let c = a.eval(p.0 + t * dx, p.1 + t * dy).pinv_quad(d);
        if !c.is_finite() {
            return f64::INFINITY;
        }
        acc += c.sqrt();
    }
    acc
}

/// Whether the segment stays on allowed nodes (checked at the nodes nearest to points every `h/2`).
fn visible(grid: &Grid, mask: &DomainMask, p: (f64, f64), q: (f64, f64)) -> bool {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let m = (2.0 * dx.hypot(dy) / grid.h).ceil().max(1.0) as usize;
    (0..=m).all(|i| {
        let t = i as f64 / m as f64;
        grid.nearest(p.0 + t * dx, p.1 + t * dy).is_some_and(|k| mask.contains(k))
    })
}

/// Single-source subunit distances restricted to `allowed` nodes.
///
/// Dijkstra over the 16-neighbour lattice (axis, diagonal and knight moves) with any-angle
/// relaxation: a node may also be reached by a straight segment from its predecessor's
/// parent when that is cheaper. Costs come from [`segment_cost`]. Lattice moves alone carry an
/// O(1) direction bias, which the straight shortcuts remove where the metric allows them.
pub fn subunit_sweep(a: &MatrixField, source: usize, grid: &Grid, allowed: Option<&DomainMask>) -> Vec<f64> {
    let ok = |k: usize| allowed.is_none_or(|m| m.contains(k));
    let mut dist = vec![f64::INFINITY; grid.len()];
    if !ok(source) {
        return dist;
    }
    let mut parent: Vec<usize> = (0..grid.len()).collect();
    let mut done = vec![false; grid.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { d: 0.0, k: source });
    while let Some(Entry { d, k }) = heap.pop() {
        if done[k] || d > dist[k] {
            continue;
        }
        done[k] = true;
        let pk = grid.point(k);
        let par = parent[k];
        let pp = grid.point(par);
        for (nb, _, _) in grid.neighbours16(k) {
            if !ok(nb) || done[nb] {
                continue;
            }
            let q = grid.point(nb);
            let mut best = (d + segment_cost(a, pk, q, grid.h), k);
            if par != k && allowed.is_none_or(|m| visible(grid, m, pp, q)) {
                let via = dist[par] + segment_cost(a, pp, q, grid.h);
                if via < best.0 {
                    best = (via, par);
                }
            }
            if best.0 < dist[nb] {
                dist[nb] = best.0;
                parent[nb] = best.1;
                heap.push(Entry { d: best.0, k: nb });
            }
        }
    }
    dist
}

/// Subunit distance between two points (snapped to the nearest nodes); infinity if unreachable.
pub fn subunit_distance(a: &MatrixField, p: (f64, f64), q: (f64, f64), grid: &Grid, mask: Option<&DomainMask>) -> Result<f64> {
    let locate = |pt: (f64, f64)| {
        grid.nearest(pt.0, pt.1)
            .filter(|&k| mask.is_none_or(|m| m.contains(k)))
            .ok_or_else(|| Error::invalid(format!("point ({}, {}) is outside the domain", pt.0, pt.1)))
    };
    let (s, t) = (locate(p)?, locate(q)?);
    Ok(subunit_sweep(a, s, grid, mask)[t])
}

/// Nodes at subunit distance `< r` from `centre`.
pub fn subunit_ball(a: &MatrixField, centre: (f64, f64), r: f64, grid: &Grid) -> Result<DomainMask> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("ball radius must be nonnegative, got {r}")));
    }
    let s = grid.nearest(centre.0, centre.1).ok_or_else(|| Error::invalid("ball centre is outside the grid"))?;
    let dist = subunit_sweep(a, s, grid, None);
    DomainMask::from_interior_unchecked(grid, dist.iter().map(|&d| d < r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_square(n: usize) -> (Grid, DomainMask) {
        let g = Grid::new(0.0, 0.0, 1.0, n).unwrap();
        let m = Domain::Square { side: 1.0 }.mask(&g).unwrap();
        (g, m)
    }

    fn matmul_t(b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = b[0][i] * b[0][j] + b[1][i] * b[1][j];
            }
        }
        r
    }

    #[test]
    fn factor_examples() {
        let g = Grid::centered(1.0, 5).unwrap();
        let f = factor_matrix_field(&MatrixField::grushin(), &g).unwrap();
        for k in 0..g.len() {
            let (x, _) = g.point(k);
            assert_eq!(f.at(k), [[1.0, 0.0], [0.0, x.abs()]]);
        }
        let f = factor_matrix_field(&MatrixField::identity(), &g).unwrap();
        assert_eq!(f.at(3), [[1.0, 0.0], [0.0, 1.0]]);
        let a = Sym2 { a11: 2.0, a12: 1.0, a22: 2.0 };
        let f = factor_matrix_field(&MatrixField::constant(a), &g).unwrap();
        let p = matmul_t(f.at(0));
        let err = (p[0][0] - 2.0).abs() + (p[0][1] - 1.0).abs() + (p[1][0] - 1.0).abs() + (p[1][1] - 2.0).abs();
        assert!(err <= 1e-10, "{p:?}");
    }

    #[test]
    fn factor_rejects_indefinite() {
        let g = Grid::centered(1.0, 3).unwrap();
        let bad = MatrixField::constant(Sym2 { a11: 1.0, a12: 2.0, a22: 1.0 });
        assert!(matches!(factor_matrix_field(&bad, &g), Err(Error::NotPsd { .. })));
    }

    proptest! {
        #[test]
        fn factor_reproduces_random_psd(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64) {
            // A = MᵀM with M = [[a, b], [c, d]] is PSD by construction
            let s = Sym2 { a11: a * a + c * c, a12: a * b + c * d, a22: b * b + d * d };
            let p = matmul_t(s.sqrt());
            let scale = 1.0 + s.a11.abs() + s.a22.abs();
            prop_assert!((p[0][0] - s.a11).abs() <= 1e-10 * scale);
            prop_assert!((p[0][1] - s.a12).abs() <= 1e-10 * scale);
            prop_assert!((p[1][1] - s.a22).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn a_gradient_examples() {
        let (g, m) = unit_square(11);
        let ux = g.sample(|x, _| x);
        let f = factor_matrix_field(&MatrixField::identity(), &g).unwrap();
        let d = a_gradient(&ux, &f, &m, &g).unwrap();
        for k in (0..g.len()).filter(|&k| m.is_interior(k)) {
            assert_relative_eq!(d[k][0], 1.0, epsilon = 1e-12);
            assert_relative_eq!(d[k][1], 0.0, epsilon = 1e-12);
        }
        let uy = g.sample(|_, y| y);
        let f = factor_matrix_field(&MatrixField::grushin(), &g).unwrap();
        let d = a_gradient(&uy, &f, &m, &g).unwrap();
        let k = g.index(5, 5);
        assert_eq!(g.point(k).0, 0.5);
        assert_relative_eq!(d[k][0], 0.0);
        assert_relative_eq!(d[k][1], 0.5, epsilon = 1e-12);
        let c = vec![3.0; g.len()];
        assert!(a_gradient(&c, &f, &m, &g).unwrap().iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn affine_gradient_is_constant_under_constant_a() {
        let (g, m) = unit_square(9);
        let a = MatrixField::constant(Sym2 { a11: 2.0, a12: 1.0, a22: 2.0 });
        let f = factor_matrix_field(&a, &g).unwrap();
        let u = g.sample(|x, y| 3.0 * x - 2.0 * y + 1.0);
        let d = a_gradient(&u, &f, &m, &g).unwrap();
        let b = f.at(0);
        let want = [b[0][0] * 3.0 - b[0][1] * 2.0, b[1][0] * 3.0 - b[1][1] * 2.0];
        for k in (0..g.len()).filter(|&k| m.contains(k)) {
            assert_relative_eq!(d[k][0], want[0], epsilon = 1e-12);
            assert_relative_eq!(d[k][1], want[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn thin_mask_is_a_stencil_error() {
        let g = Grid::centered(1.0, 5).unwrap();
        let mut interior = vec![false; g.len()];
        interior[g.index(2, 2)] = true;
        let m = DomainMask::from_interior(&g, interior).unwrap();
        let mut line = vec![false; g.len()];
        line[g.index(0, 0)] = true;
        let m2 = DomainMask { interior: line, boundary: vec![false; g.len()], fractions: Vec::new() };
        assert!(gradient(&vec![0.0; g.len()], &m, &g).is_ok());
        assert!(matches!(gradient(&vec![0.0; g.len()], &m2, &g), Err(Error::Stencil { node: 0 })));
    }

    #[test]
    fn w12a_examples() {
        let (g, m) = unit_square(33);
        let mu = m.measure(&g).unwrap();
        let a = MatrixField::identity();
        assert_eq!(w12a_norm(&vec![0.0; g.len()], &a, &mu, &m, &g).unwrap(), 0.0);
        assert_relative_eq!(w12a_norm(&vec![1.0; g.len()], &a, &mu, &m, &g).unwrap(), 1.0, epsilon = 1e-12);
        let ux = g.sample(|x, _| x);
        let x2 = mu.integrate(&ux.iter().map(|v| v * v).collect::<Vec<_>>());
        assert_relative_eq!(w12a_norm(&ux, &a, &mu, &m, &g).unwrap(), (x2 + 1.0).sqrt(), epsilon = 1e-12);
        // trapezoid quadrature of x² on [0,1]
        assert_relative_eq!(x2, 1.0 / 3.0, epsilon = 1e-3);
    }

    #[test]
    fn disk_measure_sums_to_one() {
        let g = Grid::centered(1.0, 33).unwrap();
        let m = Domain::Disk { radius: 1.0 }.mask(&g).unwrap();
        let mu = m.measure(&g).unwrap();
        assert_relative_eq!(mu.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!((m.area(&g) - std::f64::consts::PI).abs() < 0.3);
    }

    #[test]
    fn euclidean_distance_examples() {
        let g = Grid::centered(1.0, 41).unwrap();
        let d = subunit_distance(&MatrixField::identity(), (0.0, 0.0), (1.0, 0.0), &g, None).unwrap();
        assert!((d - 1.0).abs() <= 2.0 * g.h);
        let d = subunit_distance(&MatrixField::constant(Sym2::diag(1.0, 0.0)), (0.0, 0.0), (0.0, 1.0), &g, None).unwrap();
        assert!(d.is_infinite());
        assert!(subunit_distance(&MatrixField::identity(), (0.0, 0.0), (3.0, 0.0), &g, None).is_err());
    }

    #[test]
    fn ball_examples() {
        let g = Grid::centered(1.0, 41).unwrap();
        assert!(subunit_ball(&MatrixField::identity(), (0.0, 0.0), 0.0, &g).unwrap().is_empty());
        assert!(subunit_ball(&MatrixField::identity(), (0.0, 0.0), -1.0, &g).is_err());
        let b = subunit_ball(&MatrixField::identity(), (0.0, 0.0), 0.5, &g).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.point(k);
            let r = x.hypot(y);
            if r < 0.5 - g.h {
                assert!(b.is_interior(k));
            }
            if r > 0.5 + g.h {
                assert!(!b.is_interior(k));
            }
        }
    }

    #[test]
    fn grushin_ball_is_flattened() {
        for n in [41, 81] {
            let g = Grid::centered(1.0, n).unwrap();
            let b = subunit_ball(&MatrixField::grushin(), (0.0, 0.0), 0.3, &g).unwrap();
            let (ex, ey) = b.extents_from(&g, g.nearest(0.0, 0.0).unwrap());
            assert!(ey < ex, "n={n}: {ex} {ey}");
        }
    }

    #[test]
    fn euclidean_distances_are_straight_lines() {
        let g = Grid::centered(1.0, 65).unwrap();
        let src = g.index(5, 9);
        let d = subunit_sweep(&MatrixField::identity(), src, &g, None);
        let (sx, sy) = g.point(src);
        for k in (0..g.len()).step_by(37) {
            let (x, y) = g.point(k);
            assert!((d[k] - (x - sx).hypot(y - sy)).abs() <= 2.0 * g.h, "{k}");
        }
    }

    #[test]
    fn metric_axioms_on_samples() {
        let g = Grid::centered(1.0, 21).unwrap();
        let a = MatrixField::diag_g(GProfile::Power(1.0)).scaled(1.0);
        let a = MatrixField::custom("shifted", move |x, y| {
            let s = a.eval(x + 0.3, y);
            Sym2 { a12: 0.1 * s.a22.sqrt(), ..s }
        });
        let pts = [g.index(3, 4), g.index(15, 2), g.index(10, 17), g.index(19, 19)];
        let sweeps: Vec<Vec<f64>> = pts.iter().map(|&p| subunit_sweep(&a, p, &g, None)).collect();
        // cost per unit length is at most 10 on this window
        let bound = 4.0 * g.h * 10.0;
        for (i, si) in sweeps.iter().enumerate() {
            assert_eq!(si[pts[i]], 0.0);
            for (j, sj) in sweeps.iter().enumerate() {
                assert!((si[pts[j]] - sj[pts[i]]).abs() <= 2.0 * g.h * 10.0);
                for (l, _) in pts.iter().enumerate() {
                    assert!(si[pts[l]] <= si[pts[j]] + sj[pts[l]] + bound);
                }
            }
        }
    }

    #[test]
    fn refinement_does_not_increase_distance() {
        let a = MatrixField::grushin();
        let mut prev = f64::INFINITY;
        for n in [33, 65, 129] {
            let g = Grid::centered(1.0, n).unwrap();
            let d = subunit_distance(&a, (0.0, 0.0), (0.0, 0.25), &g, None).unwrap();
            assert!(d <= prev + 1e-12, "{d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn table_interpolates() {
        let t = Table1d::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(5.0), 3.0);
        assert!(Table1d::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(MatrixField::parse("identity").unwrap().name(), "identity");
        assert!(MatrixField::parse("diag_g(power(2))").unwrap().is_diagonal());
        assert!(MatrixField::parse("diag_g(exp_alpha(0.5))").is_ok());
        assert!(MatrixField::parse("bogus").is_err());
        assert_eq!(Domain::parse("disk(1)").unwrap(), Domain::Disk { radius: 1.0 });
        assert!(Domain::parse("disk(-1)").is_err());
    }
}
