//! Wide-stencil monotone finite differences for `det D²u = g` on 2-D convex
//! domains with constant Dirichlet data.
//!
//! The discrete operator at an interior node is
//!
//! ```text
//! MA_h u = min over orthogonal stencil pairs (v, v⊥) of  Δ_v⁺ u · Δ_{v⊥}⁺ u,
//! ```
//!
//! where `Δ_v` is the second difference along the lattice direction `v`
//! divided by `|v|² h²` and `Δ⁺ = max(Δ, 0)`. Since `(vᵀHv)(v⊥ᵀHv⊥) = det H +
//! (vᵀHv⊥)²`, every pair over-estimates the determinant and the minimum
//! approaches it as the angular resolution grows. An arm that leaves the
//! domain is cut at the exact boundary crossing, where the Dirichlet constant
//! is used, and the second difference becomes the non-uniform three-point
//! formula
//!
//! ```text
//! Δ = 2/(a + b) · ((u_f − u₀)/a − (u₀ − u_b)/b) / (|v|² h²),
//! ```
//!
//! with `a, b ∈ (0, 1]` the forward and backward arm fractions. The scheme is
//! exact on quadratics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{DivergenceReport, Error, Result};
use crate::expr::{Expr, Var};
use crate::geometry::Domain;
use crate::grid::Grid2;
use crate::par;
use crate::radial::RadialProfile;
use crate::rhs::RhsSystem;
use crate::sparse::{bicgstab, Csr};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdParams {
    pub h: f64,
    /// Lattice directions `(a, b)` with `|a|, |b| ≤ width`; 1, 2 or 3.
    pub stencil_width: usize,
    /// Residual tolerance `‖MA_h u − g‖∞ / max(1, ‖g‖∞)`.
    pub tol: f64,
    /// Relative L∞ change between coupling sweeps.
    pub coupling_tol: f64,
    /// Under-relaxation of the coupling sweeps.
    pub relaxation: f64,
    pub max_newton: usize,
    pub max_sweeps: usize,
    pub max_euler: usize,
    pub linear_tol: f64,
}

impl Default for FdParams {
    fn default() -> Self {
        FdParams {
            h: 1.0 / 64.0,
            stencil_width: 2,
            tol: 1e-9,
            coupling_tol: 1e-8,
            relaxation: 0.5,
            max_newton: 80,
            max_sweeps: 500,
            max_euler: 20_000,
            linear_tol: 1e-11,
        }
    }
}

impl FdParams {
    pub fn with_h(h: f64) -> Self {
        FdParams { h, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(1..=3).contains(&self.stencil_width) {
            return Err(Error::invalid("need h > 0 and stencil_width in 1..=3"));
        }
        if !(self.tol > 0.0 && self.coupling_tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::invalid("relaxation must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Primitive lattice directions and their orthogonal pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// `dirs[0] = (1, 0)`, `dirs[1] = (0, 1)`.
    pub width: usize,
    pub dirs: Vec<[i64; 2]>,
    pub pairs: Vec<(usize, usize)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    pub fn new(width: usize) -> Result<Self> {
        if !(1..=3).contains(&width) {
            return Err(Error::invalid("stencil width must be 1, 2 or 3"));
        }
        let w = width as i64;
        let mut dirs: Vec<[i64; 2]> = vec![[1, 0], [0, 1]];
        for b in 1..=w {
            for a in -w..=w {
                if gcd(a, b) == 1 && !dirs.contains(&[a, b]) {
                    dirs.push([a, b]);
                }
            }
        }
        let canon = |[a, b]: [i64; 2]| if b < 0 || (b == 0 && a < 0) { [-a, -b] } else { [a, b] };
        let mut pairs = Vec::new();
        for (i, d) in dirs.iter().enumerate() {
            let perp = canon([-d[1], d[0]]);
            let j = dirs.iter().position(|e| *e == perp).expect("stencil is closed under rotation");
            if i < j {
                pairs.push((i, j));
            }
        }
        Ok(Stencil { width, dirs, pairs })
    }
}

/// Arm of a stencil direction: fraction of the lattice step in `(0, 1]` and
/// the neighbour node, or `NONE` when the arm ends on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Arm {
    len: f64,
    node: usize,
}

/// Grid, interior mask and cut-cell arms for one domain and stencil.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub domain: Domain,
    pub grid: Grid2,
    pub stencil: Stencil,
    pub interior: Vec<bool>,
    /// Grid indices of interior nodes, row-major.
    pub nodes: Vec<usize>,
    compact: Vec<usize>,
    /// `nodes.len() × dirs.len()` entries of `[forward, backward]`.
    arms: Vec<[Arm; 2]>,
}

impl Discretization {
    pub fn new(domain: &Domain, h: f64, width: usize) -> Result<Self> {
        domain.validate()?;
        if domain.dim() != 2 {
            return Err(Error::invalid("the finite-difference solver works on 2-D domains"));
        }
        if !(h > 0.0) {
            return Err(Error::invalid("h must be positive"));
        }
        let (lo, hi) = domain.bounding_box();
        let grid = Grid2::covering([lo[0], lo[1]], [hi[0], hi[1]], h, width + 1);
        Self::on_grid(domain, grid, width)
    }

    /// Discretization on a given lattice, which must leave at least `width`
    /// exterior layers around the domain.
    pub fn on_grid(domain: &Domain, grid: Grid2, width: usize) -> Result<Self> {
        domain.validate()?;
        if domain.dim() != 2 {
            return Err(Error::invalid("the finite-difference solver works on 2-D domains"));
        }
        let stencil = Stencil::new(width)?;
        let h = grid.h;
        let interior: Vec<bool> = (0..grid.len())
            .map(|k| {
                let x = grid.coords(k);
                domain.level(&x) < -1e-12 * h
            })
            .collect();
        let nodes: Vec<usize> = (0..grid.len()).filter(|k| interior[*k]).collect();
        if nodes.is_empty() {
            return Err(Error::invalid("no interior nodes at this grid spacing"));
        }
        let mut compact = vec![NONE; grid.len()];
        for (c, &k) in nodes.iter().enumerate() {
            compact[k] = c;
        }
        let nd = stencil.dirs.len();
        let arms_per_node = par::map_slice(&nodes, |&k| {
            let x = grid.coords(k);
            let mut out = Vec::with_capacity(nd);
            for d in &stencil.dirs {
                let mut pair = [Arm { len: 1.0, node: NONE }; 2];
                for (s, sign) in [1i64, -1].iter().enumerate() {
                    let (di, dj) = (sign * d[0], sign * d[1]);
                    let nb = grid.shifted(k, di, dj);
                    match nb {
                        Some(j) if interior[j] => pair[s] = Arm { len: 1.0, node: j },
                        _ => {
                            let end = [x[0] + di as f64 * h, x[1] + dj as f64 * h];
                            let t = domain.crossing(&x, &end).max(1e-6);
                            pair[s] = Arm { len: t, node: NONE };
                        }
                    }
                }
                out.push(pair);
            }
            out
        });
        let arms = arms_per_node.into_iter().flatten().collect();
        Ok(Discretization {
            domain: domain.clone(),
            grid,
            stencil,
            interior,
            nodes,
            compact,
            arms,
        })
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn num_interior(&self) -> usize {
        self.nodes.len()
    }

    /// Compact interior index of a grid node.
    pub fn compact_index(&self, grid_idx: usize) -> Option<usize> {
        let c = self.compact[grid_idx];
        (c != NONE).then_some(c)
    }

    /// True when no stencil arm of compact node `c` is cut by the boundary.
    pub fn is_full(&self, c: usize) -> bool {
        let nd = self.stencil.dirs.len();
        self.arms[c * nd..(c + 1) * nd].iter().all(|[f, b]| f.node != NONE && b.node != NONE)
    }

    #[inline]
    fn arm(&self, c: usize, d: usize) -> [Arm; 2] {
        self.arms[c * self.stencil.dirs.len() + d]
    }

    /// Forward/backward coefficients and `1/(|v|² h²)` scaling of direction `d`.
    #[inline]
    fn coeffs(&self, c: usize, d: usize) -> (f64, f64, [Arm; 2]) {
        let [f, b] = self.arm(c, d);
        let v = self.stencil.dirs[d];
        let l2 = ((v[0] * v[0] + v[1] * v[1]) as f64) * self.grid.h * self.grid.h;
        let s = 2.0 / ((f.len + b.len) * l2);
        (s / f.len, s / b.len, [f, b])
    }

    /// Second difference of `u` (grid-sized) along stencil direction `d` at
    /// compact node `c`, against the boundary constant `bc`.
    #[inline]
    pub fn second_difference(&self, u: &[f64], bc: f64, c: usize, d: usize) -> f64 {
        let (cf, cb, [f, b]) = self.coeffs(c, d);
        let u0 = u[self.nodes[c]];
        let uf = if f.node == NONE { bc } else { u[f.node] };
        let ub = if b.node == NONE { bc } else { u[b.node] };
        cf * (uf - u0) + cb * (ub - u0)
    }

    /// `(MA_h u, active pair, Δ_v, Δ_{v⊥})` at compact node `c`.
    pub fn ma_at(&self, u: &[f64], bc: f64, c: usize) -> (f64, usize, f64, f64) {
        let mut best = (f64::INFINITY, 0, 0.0, 0.0);
        for (p, &(i, j)) in self.stencil.pairs.iter().enumerate() {
            let a = self.second_difference(u, bc, c, i);
            let b = self.second_difference(u, bc, c, j);
            let v = a.max(0.0) * b.max(0.0);
            if v < best.0 {
                best = (v, p, a, b);
            }
        }
        best
    }

    /// `MA_h u` at every interior node (compact order).
    pub fn ma_operator(&self, u: &[f64], bc: f64) -> Vec<f64> {
        par::map_range(self.nodes.len(), |c| self.ma_at(u, bc, c).0)
    }

    /// Five-point Laplacian with cut cells.
    pub fn laplacian(&self, u: &[f64], bc: f64, c: usize) -> f64 {
        self.second_difference(u, bc, c, 0) + self.second_difference(u, bc, c, 1)
    }

    /// Centered gradient with non-uniform arms on cut cells.
    pub fn gradient(&self, u: &[f64], bc: f64, c: usize) -> [f64; 2] {
        let h = self.grid.h;
        let u0 = u[self.nodes[c]];
        let mut g = [0.0; 2];
        for (d, gd) in g.iter_mut().enumerate() {
            let [f, b] = self.arm(c, d);
            let uf = if f.node == NONE { bc } else { u[f.node] };
            let ub = if b.node == NONE { bc } else { u[b.node] };
            let (a, bb) = (f.len, b.len);
            *gd = (bb / (a * (a + bb)) * (uf - u0) + a / (bb * (a + bb)) * (u0 - ub)) / h;
        }
        g
    }

    pub fn gradients(&self, u: &[f64], bc: f64) -> Vec<[f64; 2]> {
        par::map_range(self.nodes.len(), |c| self.gradient(u, bc, c))
    }

    /// Smallest second difference over all stencil directions and nodes.
    pub fn min_second_difference(&self, u: &[f64], bc: f64) -> f64 {
        par::map_range(self.nodes.len(), |c| {
            (0..self.stencil.dirs.len())
                .map(|d| self.second_difference(u, bc, c, d))
                .fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Largest second difference, used to scale convexity tolerances.
    pub fn max_second_difference(&self, u: &[f64], bc: f64) -> f64 {
        par::map_range(self.nodes.len(), |c| {
            (0..self.stencil.dirs.len())
                .map(|d| self.second_difference(u, bc, c, d).abs())
                .fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Grid-sized field equal to `bc` off the interior.
    pub fn expand(&self, interior_values: &[f64], bc: f64) -> Vec<f64> {
        let mut u = vec![bc; self.grid.len()];
        for (c, &k) in self.nodes.iter().enumerate() {
            u[k] = interior_values[c];
        }
        u
    }

    /// Solves `Δ_h u = rhs` with `u = bc` on the boundary.
    pub fn poisson(&self, rhs: &[f64], bc: f64, linear_tol: f64) -> Result<Vec<f64>> {
        let ni = self.nodes.len();
        let mut b = vec![0.0; ni];
        let rows = par::map_range(ni, |c| {
            let mut row = Vec::with_capacity(5);
            let mut diag = 0.0;
            let mut known = 0.0;
            for d in 0..2 {
                let (cf, cb, [f, bk]) = self.coeffs(c, d);
                diag += cf + cb;
                for (coef, arm) in [(cf, f), (cb, bk)] {
                    if arm.node == NONE {
                        known += coef * bc;
                    } else {
                        row.push((self.compact[arm.node], -coef));
                    }
                }
            }
            row.push((c, diag));
            (row, known)
        });
        let mut mat_rows = Vec::with_capacity(ni);
        for (c, (row, known)) in rows.into_iter().enumerate() {
            // −Δ_h u = −rhs
            b[c] = -rhs[c] + known;
            mat_rows.push(row);
        }
        let a = Csr::from_rows(mat_rows);
        let mut x = vec![bc; ni];
        bicgstab(&a, &b, &mut x, linear_tol, 4 * ni + 100)?;
        Ok(self.expand(&x, bc))
    }

    /// Field extended to the exterior nodes adjacent to the domain by linear
    /// extrapolation through the boundary crossing, averaged over axes;
    /// remaining exterior nodes hold `bc`. Bilinear interpolation of the
    /// result is then second-order accurate up to the boundary.
    pub fn ghost_extend(&self, u: &[f64], bc: f64) -> Vec<f64> {
        let mut sum = vec![0.0; self.grid.len()];
        let mut cnt = vec![0u32; self.grid.len()];
        for (c, &k) in self.nodes.iter().enumerate() {
            for d in 0..2 {
                let arms = self.arm(c, d);
                let v = self.stencil.dirs[d];
                for (s, arm) in arms.iter().enumerate() {
                    if arm.node != NONE {
                        continue;
                    }
                    let sign = if s == 0 { 1 } else { -1 };
                    if let Some(e) = self.grid.shifted(k, sign * v[0], sign * v[1]) {
                        if !self.interior[e] {
                            sum[e] += u[k] + (bc - u[k]) / arm.len;
                            cnt[e] += 1;
                        }
                    }
                }
            }
        }
        let mut out = u.to_vec();
        for k in 0..self.grid.len() {
            if !self.interior[k] {
                out[k] = if cnt[k] > 0 { sum[k] / cnt[k] as f64 } else { bc };
            }
        }
        out
    }

    /// Bilinear interpolation of a grid field at `p`.
    pub fn interpolate(&self, field: &[f64], p: [f64; 2]) -> Option<f64> {
        let (i, j, fx, fy) = self.grid.locate(p)?;
        let g = &self.grid;
        let v00 = field[g.index(i, j)];
        let v10 = field[g.index(i + 1, j)];
        let v01 = field[g.index(i, j + 1)];
        let v11 = field[g.index(i + 1, j + 1)];
        Some((1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11)
    }

    /// Radial profile sampled at the interior nodes, centred at `center`.
    pub fn sample_profile(&self, profile: &RadialProfile, center: [f64; 2]) -> Vec<f64> {
        let mut u = vec![profile.boundary_value; self.grid.len()];
        for &k in &self.nodes {
            let x = self.grid.coords(k);
            let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
            u[k] = profile.value_at(r);
        }
        u
    }
}

/// `MA_h u` at grid node `node`, which must be interior.
pub fn ma_operator_discrete(disc: &Discretization, u: &[f64], bc: f64, node: usize) -> Result<f64> {
    match disc.compact_index(node) {
        Some(c) => Ok(disc.ma_at(u, bc, c).0),
        None => Err(Error::invalid(format!("node {node} is not interior"))),
    }
}

/// Right-hand side evaluated at a node: `g(x, u(x), ∇u(x))`.
pub trait NodeSource: Sync {
    fn eval(&self, node: usize, x: [f64; 2], u: f64, p: [f64; 2]) -> Result<f64>;
    fn reads_u(&self) -> bool {
        true
    }
    fn reads_p(&self) -> bool {
        true
    }
}

/// Source given as an expression in `x1, x2`, `z1 = u` and `p1, p2`.
#[derive(Debug, Clone)]
pub struct ExprField(pub Expr);

impl NodeSource for ExprField {
    fn eval(&self, _: usize, x: [f64; 2], u: f64, p: [f64; 2]) -> Result<f64> {
        self.0.eval(&x, &[u], &p)
    }

    fn reads_u(&self) -> bool {
        self.0.arity().1 > 0
    }

    fn reads_p(&self) -> bool {
        self.0.arity().2 > 0
    }
}

/// Source depending on position only.
pub struct FnField<F>(pub F);

impl<F: Fn([f64; 2]) -> f64 + Sync> NodeSource for FnField<F> {
    fn eval(&self, _: usize, x: [f64; 2], _: f64, _: [f64; 2]) -> Result<f64> {
        Ok((self.0)(x))
    }

    fn reads_u(&self) -> bool {
        false
    }

    fn reads_p(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub newton_iterations: usize,
    pub euler_steps: usize,
    pub linear_iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

struct Eval {
    f: Vec<f64>,
    /// `B_h u − √g`, the residual policy iteration works on.
    fs: Vec<f64>,
    g: Vec<f64>,
    /// `‖F‖∞ / max(1, ‖g‖∞)`, the convergence measure.
    res: f64,
    /// Scaled `‖B_h u − √g‖₂`, the line-search merit.
    merit: f64,
}

fn evaluate(disc: &Discretization, src: &dyn NodeSource, u: &[f64], bc: f64) -> Result<Eval> {
    let grads = if src.reads_p() {
        Some(disc.gradients(u, bc))
    } else {
        None
    };
    let g = par::map_range(disc.nodes.len(), |c| {
        let k = disc.nodes[c];
        let p = grads.as_ref().map_or([0.0; 2], |gr| gr[c]);
        src.eval(k, disc.grid.coords(k), u[k], p)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    if let Some(c) = g.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        let x = disc.grid.coords(disc.nodes[c]);
        return Err(Error::invalid(format!(
            "source must be positive, got {} at ({}, {})",
            g[c], x[0], x[1]
        )));
    }
    let ma = disc.ma_operator(u, bc);
    let f: Vec<f64> = ma.iter().zip(&g).map(|(a, b)| a - b).collect();
    let fs: Vec<f64> = par::map_range(disc.nodes.len(), |c| bellman_at(disc, u, bc, c).0 - g[c].sqrt());
    let gmax = g.iter().fold(1.0f64, |a, b| a.max(*b));
    let res = f.iter().fold(0.0f64, |a, b| a.max(b.abs())) / gmax;
    let merit = (fs.iter().map(|v| v * v).sum::<f64>() / fs.len() as f64).sqrt() / gmax.sqrt();
    Ok(Eval { f, fs, g, res, merit })
}

/// Range of the weight `a` in the Bellman form. Covers second-difference
/// ratios up to `10⁸`, far beyond those of sources that vanish like `dist³`.
const WEIGHT_RANGE: (f64, f64) = (1e-4, 1e4);

/// `B_h u = min_{pair, a} (a Δ_v u + Δ_w u / a) / 2` at compact node `c`, with
/// the minimising pair and weight. Where both differences are positive the
/// inner minimum is `√(Δ_v Δ_w)`, so `B_h u = √MA_h u` on convex fields; the
/// form is a minimum of monotone linear operators, which is what makes
/// policy iteration converge from any start.
fn bellman_at(disc: &Discretization, u: &[f64], bc: f64, c: usize) -> (f64, usize, f64) {
    let (lo, hi) = WEIGHT_RANGE;
    let mut best = (f64::INFINITY, 0, 1.0);
    for (p, &(i, j)) in disc.stencil.pairs.iter().enumerate() {
        let dv = disc.second_difference(u, bc, c, i);
        let dw = disc.second_difference(u, bc, c, j);
        let mut cands = [lo, hi, 1.0];
        if dv > 0.0 && dw > 0.0 {
            cands[2] = (dw / dv).sqrt().clamp(lo, hi);
        }
        for a in cands {
            let v = 0.5 * (a * dv + dw / a);
            if v < best.0 {
                best = (v, p, a);
            }
        }
    }
    best
}

/// Rows of `−∂B_h/∂u` for the policy minimising at `u`. Each row is a
/// positively weighted sum of second differences, so the matrix is an
/// M-matrix.
fn policy_matrix(disc: &Discretization, u: &[f64], bc: f64) -> Csr {
    let rows = par::map_range(disc.nodes.len(), |c| {
        let (_, p, a) = bellman_at(disc, u, bc, c);
        let (i, j) = disc.stencil.pairs[p];
        let mut row = Vec::with_capacity(5);
        let mut diag = 0.0;
        for (d, mult) in [(i, 0.5 * a), (j, 0.5 / a)] {            let (cf, cb, [f, b]) = disc.coeffs(c, d);
            diag += mult * (cf + cb);
            for (coef, arm) in [(cf, f), (cb, b)] {
                if arm.node != NONE {
                    row.push((disc.compact[arm.node], -mult * coef));
                }
            }
        }
        row.push((c, diag));
        row
    });
    Csr::from_rows(rows)
}

/// Diagonal of `−∂F/∂u` with multipliers floored at `√g`, the curvature
/// scale of a solution; `1/diag` is a stable explicit step.
fn euler_diag(disc: &Discretization, u: &[f64], bc: f64, g: &[f64], c: usize) -> f64 {
    let (_, p, dv, dw) = disc.ma_at(u, bc, c);
    let floor = g[c].sqrt();
    let (i, j) = disc.stencil.pairs[p];
    let mut diag = 0.0;
    for (d, mult) in [(i, dw.max(floor)), (j, dv.max(floor))] {
        let (cf, cb, _) = disc.coeffs(c, d);
        diag += mult * (cf + cb);
    }
    diag
}

/// Reference convex field `bc + w` with `Δ_h w = 2`, `w = 0` on the boundary.
fn reference_field(disc: &Discretization, bc: f64, params: &FdParams) -> Result<Vec<f64>> {
    let two = vec![2.0; disc.num_interior()];
    disc.poisson(&two, bc, params.linear_tol)
}

/// Initial guess `Δ_h u = 2√ĝ`, with `ĝ` the source evaluated on `reference`.
fn initial_guess(
    disc: &Discretization,
    src: &dyn NodeSource,
    reference: &[f64],
    bc: f64,
    params: &FdParams,
) -> Result<Vec<f64>> {
    let grads = disc.gradients(reference, bc);
    let rhs = par::map_range(disc.nodes.len(), |c| {
        let k = disc.nodes[c];
        let g = src.eval(k, disc.grid.coords(k), reference[k], grads[c]).unwrap_or(1.0);
        2.0 * g.max(1e-12).sqrt()
    });
    disc.poisson(&rhs, bc, params.linear_tol)
}

/// Newton on the Bellman form `B_h u = √g`, which is policy iteration: full
/// steps when `g` reads neither `u` nor `∇u`, a merit line search otherwise.
/// An explicit monotone Euler map `u ← u + Δt (MA_h u − g)` takes over when
/// a step is rejected.
pub fn solve_scalar_on(
    disc: &Discretization,
    src: &dyn NodeSource,
    bc: f64,
    init: Option<Vec<f64>>,
    params: &FdParams,
) -> Result<(Vec<f64>, FdReport)> {
    params.validate()?;
    let mut u = match init {
        Some(u) => u,
        None => {
            let reference = reference_field(disc, bc, params)?;
            initial_guess(disc, src, &reference, bc, params)?
        }
    };
    let ni = disc.num_interior();
    let mut report = FdReport::default();
    let mut ev = evaluate(disc, src, &u, bc)?;
    report.history.push(ev.res);
    while ev.res > params.tol {
        if report.newton_iterations >= params.max_newton {
            return Err(Error::Divergence(DivergenceReport {
                solver: "finite-difference Newton".into(),
                reason: format!("residual {:e} above {:e}", ev.res, params.tol),
                iterations: report.newton_iterations,
                history: report.history,
            }));
        }
        report.newton_iterations += 1;
        let a = policy_matrix(disc, &u, bc);
        let mut delta = vec![0.0; ni];
        let lin = bicgstab(&a, &ev.fs, &mut delta, params.linear_tol, 4 * ni + 100);
        let mut accepted = None;
        if let Ok(it) = lin {
            report.linear_iterations += it;
            if !src.reads_u() && !src.reads_p() {
                // plain policy iteration: full steps decrease monotonically after the first
                let mut trial = u.clone();
                for (c, &k) in disc.nodes.iter().enumerate() {
                    trial[k] += delta[c];
                }
                if let Ok(e) = evaluate(disc, src, &trial, bc) {
                    accepted = Some((trial, e));
                }
            }
            let mut s = 1.0;
            for _ in 0..if accepted.is_some() { 0 } else { 12 } {
                let mut trial = u.clone();
                for (c, &k) in disc.nodes.iter().enumerate() {
                    trial[k] += s * delta[c];
                }
                if let Ok(e) = evaluate(disc, src, &trial, bc) {
                    if e.merit < ev.merit * (1.0 - 1e-4 * s) {
                        accepted = Some((trial, e));
                        break;
                    }
                }
                s *= 0.5;
            }
        }
        match accepted {
            Some((trial, e)) => {
                u = trial;
                ev = e;
            }
            None => {
                let (nu, ne) = euler_phase(disc, src, u, ev, bc, params, &mut report)?;
                u = nu;
                ev = ne;
            }
        }
        report.history.push(ev.res);
    }
    report.residual = ev.res;
    Ok((u, report))
}

fn euler_phase(
    disc: &Discretization,
    src: &dyn NodeSource,
    mut u: Vec<f64>,
    mut ev: Eval,
    bc: f64,
    params: &FdParams,
    report: &mut FdReport,
) -> Result<(Vec<f64>, Eval)> {
    let start = ev.merit;
    let budget = 2000.min(params.max_euler.saturating_sub(report.euler_steps));
    for _ in 0..budget {
        // local step 1/(2 diag), i.e. h²/(8 max(Δ, √g)) at uniform interior nodes
        let steps = par::map_range(disc.nodes.len(), |c| 0.5 * ev.f[c] / euler_diag(disc, &u, bc, &ev.g, c));
        let mut next = u.clone();
        for (c, &k) in disc.nodes.iter().enumerate() {
            next[k] += steps[c];
        }
        report.euler_steps += 1;
        let e = evaluate(disc, src, &next, bc)?;
        u = next;
        ev = e;
        if ev.res <= params.tol || ev.merit < 0.1 * start {
            return Ok((u, ev));
        }
    }
    // partial progress hands control back to Newton
    if budget > 0 && ev.merit < 0.99 * start {
        return Ok((u, ev));
    }
    Err(Error::Divergence(DivergenceReport {
        solver: "finite-difference Newton with Euler fallback".into(),
        reason: format!("both stalled at residual {:e}", ev.res),
        iterations: report.newton_iterations + report.euler_steps,
        history: report.history.clone(),
    }))
}

/// Solution fields of `m` components on a 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: Grid2,
    pub interior: Vec<bool>,
    pub boundary_values: Vec<f64>,
    /// Width of the stencil the fields were solved with.
    pub stencil_width: usize,
    /// Grid-sized fields; non-interior nodes hold the boundary constant.
    pub fields: Vec<Vec<f64>>,
    /// Discrete convexity along every stencil direction, per field.
    pub convex: Vec<bool>,
}

const BINARY_MAGIC: &[u8; 8] = b"MASYMGRD";

impl GridSolution {
    pub fn from_fields(disc: &Discretization, fields: Vec<Vec<f64>>, boundary_values: Vec<f64>) -> Self {
        let convex = fields
            .iter()
            .zip(&boundary_values)
            .map(|(u, &bc)| {
                let scale = disc.max_second_difference(u, bc).max(1.0);
                disc.min_second_difference(u, bc) >= -1e-8 * scale
            })
            .collect();
        GridSolution {
            grid: disc.grid.clone(),
            interior: disc.interior.clone(),
            boundary_values,
            stencil_width: disc.stencil.width,
            fields,
            convex,
        }
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(|k| self.interior[*k])
    }

    /// Largest interior value difference against another field.
    pub fn max_interior_diff(&self, i: usize, other: &[f64]) -> f64 {
        self.interior_nodes()
            .map(|k| (self.fields[i][k] - other[k]).abs())
            .fold(0.0, f64::max)
    }

    /// `x,y,u1..um` for interior nodes in row-major order, preceded by a
    /// `#` line carrying the lattice.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "# h={} offset={}:{} nx={} ny={} width={}\nx,y",
            g.h, g.offset[0], g.offset[1], g.nx, g.ny, self.stencil_width
        );
        for i in 1..=self.m() {
            let _ = write!(s, ",u{i}");
        }
        s.push('\n');
        for k in self.interior_nodes() {
            let x = g.coords(k);
            let _ = write!(s, "{},{}", x[0], x[1]);
            for f in &self.fields {
                let _ = write!(s, ",{}", f[k]);
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`GridSolution::to_csv`] output. Without the lattice line the
    /// spacing is inferred from the coordinates.
    pub fn from_csv(text: &str, boundary_values: &[f64]) -> Result<Self> {
        let mut lattice: Option<(f64, [i64; 2], usize, usize, usize)> = None;
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                lattice = parse_lattice(rest);
                continue;
            }
            if header.is_none() {
                header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::invalid(format!("CSV line {}: {e}", ln + 1)))?;
            rows.push(vals);
        }
        let header = header.ok_or_else(|| Error::invalid("CSV has no header"))?;
        if header.len() < 3 || header[0] != "x" || header[1] != "y" {
            return Err(Error::invalid("CSV header must start with x,y"));
        }
        let m = header.len() - 2;
        if boundary_values.len() != m {
            return Err(Error::invalid(format!("expected {m} boundary values")));
        }
        if rows.iter().any(|r| r.len() != m + 2) || rows.is_empty() {
            return Err(Error::invalid("CSV rows must all have x, y and every field"));
        }
        let (grid, stencil_width) = match lattice {
            Some((h, offset, nx, ny, w)) => (Grid2 { offset, h, nx, ny }, w),
            None => (infer_grid(&rows)?, FdParams::default().stencil_width),
        };
        let mut interior = vec![false; grid.len()];
        let mut fields: Vec<Vec<f64>> = boundary_values.iter().map(|&c| vec![c; grid.len()]).collect();
        for r in &rows {
            let k = grid
                .nearest_node([r[0], r[1]], 1e-6)
                .ok_or_else(|| Error::invalid(format!("point ({}, {}) is not a lattice node", r[0], r[1])))?;
            interior[k] = true;
            for i in 0..m {
                fields[i][k] = r[2 + i];
            }
        }
        Ok(GridSolution {
            grid,
            interior,
            boundary_values: boundary_values.to_vec(),
            stencil_width,
            convex: vec![false; m],
            fields,
        })
    }

    /// Little-endian binary layout: magic, `h`, offsets, `nx`, `ny`, `m`,
    /// stencil width, boundary constants, convexity flags, run-length interior mask starting
    /// with an exterior run, then row-major fields.
    pub fn to_binary(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut b = Vec::new();
        b.extend_from_slice(BINARY_MAGIC);
        b.extend_from_slice(&g.h.to_le_bytes());
        b.extend_from_slice(&g.offset[0].to_le_bytes());
        b.extend_from_slice(&g.offset[1].to_le_bytes());
        b.extend_from_slice(&(g.nx as u64).to_le_bytes());
        b.extend_from_slice(&(g.ny as u64).to_le_bytes());
        b.extend_from_slice(&(self.m() as u64).to_le_bytes());
        b.extend_from_slice(&(self.stencil_width as u64).to_le_bytes());
        for c in &self.boundary_values {
            b.extend_from_slice(&c.to_le_bytes());
        }
        for c in &self.convex {
            b.push(*c as u8);
        }
        let mut runs: Vec<u64> = Vec::new();
        let mut cur = false;
        let mut len = 0u64;
        for &v in &self.interior {
            if v == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = v;
                len = 1;
            }
        }
        runs.push(len);
        b.extend_from_slice(&(runs.len() as u64).to_le_bytes());
        for r in runs {
            b.extend_from_slice(&r.to_le_bytes());
        }
        for f in &self.fields {
            for v in f {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { b: bytes, pos: 0 };
        if rd.take(8)? != BINARY_MAGIC {
            return Err(Error::invalid("not a grid solution file"));
        }
        let h = rd.f64()?;
        let offset = [rd.i64()?, rd.i64()?];
        let nx = rd.u64()? as usize;
        let ny = rd.u64()? as usize;
        let m = rd.u64()? as usize;
        let stencil_width = rd.u64()? as usize;
        let len = nx.checked_mul(ny).ok_or_else(|| Error::invalid("grid too large"))?;
        if m > 64 || len > bytes.len() || !(1..=3).contains(&stencil_width) {
            return Err(Error::invalid("corrupt grid header"));
        }
        let boundary_values = (0..m).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?;
        let convex = (0..m).map(|_| Ok(rd.take(1)?[0] != 0)).collect::<Result<Vec<_>>>()?;
        let nruns = rd.u64()? as usize;
        if nruns > len + 1 {
            return Err(Error::invalid("corrupt mask"));
        }
        let mut interior = Vec::with_capacity(len);
        let mut cur = false;
        for _ in 0..nruns {
            let r = rd.u64()? as usize;
            if interior.len() + r > len {
                return Err(Error::invalid("corrupt mask"));
            }
            interior.extend(std::iter::repeat_n(cur, r));
            cur = !cur;
        }
        if interior.len() != len {
            return Err(Error::invalid("mask length mismatch"));
        }
        let fields = (0..m)
            .map(|_| (0..len).map(|_| rd.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(GridSolution {
            grid: Grid2 { offset, h, nx, ny },
            interior,
            boundary_values,
            stencil_width,
            fields,
            convex,
        })
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.b.len() {
            return Err(Error::invalid("truncated grid file"));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn arr(&mut self) -> Result<[u8; 8]> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(a)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.arr()?))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.arr()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
}

fn parse_lattice(s: &str) -> Option<(f64, [i64; 2], usize, usize, usize)> {
    let mut width = FdParams::default().stencil_width;
    let mut h = None;
    let mut off = None;
    let mut nx = None;
    let mut ny = None;
    for tok in s.split_whitespace() {
        let (k, v) = tok.split_once('=')?;
        match k {
            "h" => h = v.parse().ok(),
            "offset" => {
                let (a, b) = v.split_once(':')?;
                off = Some([a.parse().ok()?, b.parse().ok()?]);
            }
            "nx" => nx = v.parse().ok(),
            "ny" => ny = v.parse().ok(),
            "width" => width = v.parse().ok()?,
            _ => {}
        }
    }
    Some((h?, off?, nx?, ny?, width))
}

fn infer_grid(rows: &[Vec<f64>]) -> Result<Grid2> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    xs.sort_by(f64::total_cmp);
    let h = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    if !h.is_finite() {
        return Err(Error::invalid("cannot infer grid spacing from fewer than two columns"));
    }
    // snap to 1/N when the spacing is that close to it
    let inv = (1.0 / h).round();
    let h = if ((1.0 / h) - inv).abs() < 1e-6 * inv { 1.0 / inv } else { h };
    let idx = |v: f64| (v / h).round() as i64;
    let (mut lo, mut hi) = ([i64::MAX; 2], [i64::MIN; 2]);
    for r in rows {
        for d in 0..2 {
            lo[d] = lo[d].min(idx(r[d]));
            hi[d] = hi[d].max(idx(r[d]));
        }
    }
    // one layer of exterior nodes around the data
    Ok(Grid2 {
        offset: [lo[0] - 3, lo[1] - 3],
        h,
        nx: (hi[0] - lo[0] + 7) as usize,
        ny: (hi[1] - lo[1] + 7) as usize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarFdSolution {
    pub solution: GridSolution,
    pub report: FdReport,
}

/// Solves `det D²u = g(x, u, ∇u)` in `domain` with `u = bc` on the boundary.
pub fn solve_scalar_fd(domain: &Domain, g: &dyn NodeSource, bc: f64, params: &FdParams) -> Result<ScalarFdSolution> {
    params.validate()?;
    let disc = Discretization::new(domain, params.h, params.stencil_width)?;
    let (u, report) = solve_scalar_on(&disc, g, bc, None, params)?;
    Ok(ScalarFdSolution {
        solution: GridSolution::from_fields(&disc, vec![u], vec![bc]),
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFdReport {
    pub sweeps: usize,
    /// Relative L∞ change after each sweep.
    pub history: Vec<f64>,
    /// Per-component residual at the end of the last sweep.
    pub residuals: Vec<f64>,
    pub newton_iterations: usize,
    pub euler_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFdSolution {
    pub solution: GridSolution,
    pub report: SystemFdReport,
}

/// Component `i` of a system with the other components frozen and the
/// gradient taken from the previous sweep.
struct Frozen<'a> {
    sys: &'a RhsSystem,
    i: usize,
    fields: &'a [Vec<f64>],
    compact: &'a [usize],
    grads: &'a [[f64; 2]],
}

impl NodeSource for Frozen<'_> {
    fn eval(&self, node: usize, x: [f64; 2], u: f64, _: [f64; 2]) -> Result<f64> {
        let z: Vec<f64> = (0..self.fields.len())
            .map(|j| if j == self.i { u } else { self.fields[j][node] })
            .collect();
        let p = self.grads[self.compact[node]];
        self.sys.eval_f(self.i, &x, &z, &p)
    }

    fn reads_u(&self) -> bool {
        self.sys.expr(self.i).mentions(Var::Z(self.i))
    }

    fn reads_p(&self) -> bool {
        false
    }
}

/// Gauss–Seidel over components with under-relaxation, each component
/// solved by [`solve_scalar_on`] with the others frozen.
pub fn solve_system_fd(
    domain: &Domain,
    sys: &RhsSystem,
    boundary_values: &[f64],
    params: &FdParams,
) -> Result<SystemFdSolution> {
    params.validate()?;
    let disc = Discretization::new(domain, params.h, params.stencil_width)?;
    solve_system_on(&disc, sys, boundary_values, params)
}

pub fn solve_system_on(
    disc: &Discretization,
    sys: &RhsSystem,
    boundary_values: &[f64],
    params: &FdParams,
) -> Result<SystemFdSolution> {
    let m = sys.m();
    if sys.dim() != 2 {
        return Err(Error::invalid("the system must be posed in two dimensions"));
    }
    if boundary_values.len() != m {
        return Err(Error::invalid(format!("expected {m} boundary values")));
    }
    let refs: Vec<Vec<f64>> = boundary_values
        .iter()
        .map(|&c| reference_field(disc, c, params))
        .collect::<Result<_>>()?;
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(m);
    {
        let ref_grads: Vec<Vec<[f64; 2]>> = refs
            .iter()
            .zip(boundary_values)
            .map(|(r, &c)| disc.gradients(r, c))
            .collect();
        for i in 0..m {
            let src = Frozen {
                sys,
                i,
                fields: &refs,
                compact: &disc.compact,
                grads: &ref_grads[i],
            };
            u.push(initial_guess(disc, &src, &refs[i], boundary_values[i], params)?);
        }
    }
    let mut report = SystemFdReport {
        sweeps: 0,
        history: Vec::new(),
        residuals: vec![0.0; m],
        newton_iterations: 0,
        euler_steps: 0,
    };
    for sweep in 0..params.max_sweeps {
        let old = u.clone();
        let grads: Vec<Vec<[f64; 2]>> = old
            .iter()
            .zip(boundary_values)
            .map(|(f, &c)| disc.gradients(f, c))
            .collect();
        for i in 0..m {
            let src = Frozen {
                sys,
                i,
                fields: &u,
                compact: &disc.compact,
                grads: &grads[i],
            };
            let (new, rep) = solve_scalar_on(disc, &src, boundary_values[i], Some(u[i].clone()), params)?;
            report.newton_iterations += rep.newton_iterations;
            report.euler_steps += rep.euler_steps;
            report.residuals[i] = rep.residual;
            let w = if sweep == 0 { 1.0 } else { params.relaxation };
            for &k in &disc.nodes {
                u[i][k] = (1.0 - w) * u[i][k] + w * new[k];
            }
        }
        report.sweeps = sweep + 1;
        let change = (0..m)
            .map(|i| {
                let d = disc.nodes.iter().map(|&k| (u[i][k] - old[i][k]).abs()).fold(0.0, f64::max);
                let s = disc.nodes.iter().map(|&k| u[i][k].abs()).fold(0.0, f64::max).max(1e-300);
                d / s
            })
            .fold(0.0, f64::max);
        report.history.push(change);
        if change <= params.coupling_tol {
            return Ok(SystemFdSolution {
                solution: GridSolution::from_fields(disc, u, boundary_values.to_vec()),
                report,
            });
        }
    }
    Err(Error::Divergence(DivergenceReport {
        solver: "coupled finite-difference Gauss-Seidel".into(),
        reason: format!("inter-sweep change above {:e} after {} sweeps", params.coupling_tol, params.max_sweeps),
        iterations: params.max_sweeps,
        history: report.history,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_sizes() {
        let s = Stencil::new(1).unwrap();
        assert_eq!((s.dirs.len(), s.pairs.len()), (4, 2));
        let s = Stencil::new(2).unwrap();
        assert_eq!((s.dirs.len(), s.pairs.len()), (8, 4));
        let s = Stencil::new(3).unwrap();
        assert_eq!((s.dirs.len(), s.pairs.len()), (16, 8));
        for (i, j) in s.pairs {
            let (a, b) = (s.dirs[i], s.dirs[j]);
            assert_eq!(a[0] * b[0] + a[1] * b[1], 0);
        }
    }

    #[test]
    fn operator_is_exact_on_quadratics() {
        let disc = Discretization::new(&Domain::unit_disk(), 1.0 / 16.0, 2).unwrap();
        for (scale, expect) in [(0.5, 1.0), (1.0, 4.0)] {
            let mut u = vec![0.0; disc.grid.len()];
            for k in 0..u.len() {
                let [x, y] = disc.grid.coords(k);
                u[k] = scale * (x * x + y * y - 1.0);
            }
            let ma = disc.ma_operator(&u, 0.0);
            for v in ma {
                assert!((v - expect).abs() < 1e-9, "{v}");
            }
        }
    }

    #[test]
    fn flat_direction_gives_zero() {
        let disc = Discretization::new(&Domain::unit_disk(), 1.0 / 32.0, 2).unwrap();
        let u: Vec<f64> = (0..disc.grid.len())
            .map(|k| {
                let [x, _] = disc.grid.coords(k);
                x * x
            })
            .collect();
        for (c, &k) in disc.nodes.iter().enumerate() {
            let [x, y] = disc.grid.coords(k);
            if x.hypot(y) < 0.5 {
                assert!(disc.ma_at(&u, 0.0, c).0.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_solutions_are_reproduced() {
        for (g, scale) in [(4.0, 1.0), (1.0, 0.5)] {
            let sol = solve_scalar_fd(&Domain::unit_disk(), &FnField(|_| g), 0.0, &FdParams::with_h(1.0 / 32.0)).unwrap();
            let s = &sol.solution;
            let err = s
                .interior_nodes()
                .map(|k| {
                    let [x, y] = s.grid.coords(k);
                    (s.fields[0][k] - scale * (x * x + y * y - 1.0)).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < 1e-7, "{err}");
            assert!(s.convex[0]);
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let sol = solve_scalar_fd(&Domain::unit_disk(), &FnField(|_| 4.0), 0.0, &FdParams::with_h(0.125)).unwrap();
        let s = sol.solution;
        let back = GridSolution::from_binary(&s.to_binary()).unwrap();
        assert_eq!(back, s);
        let csv = s.to_csv();
        let back = GridSolution::from_csv(&csv, &[0.0]).unwrap();
        assert_eq!(back.fields, s.fields);
        assert_eq!(back.interior, s.interior);
        // without the lattice line
        let stripped: String = csv.lines().skip(1).map(|l| format!("{l}\n")).collect();
        let inferred = GridSolution::from_csv(&stripped, &[0.0]).unwrap();
        assert_eq!(inferred.grid.h, 0.125);
        assert!(GridSolution::from_binary(b"garbage").is_err());
    }

    #[test]
    fn ghost_extension_is_second_order() {
        for h in [1.0 / 16.0, 1.0 / 32.0] {
            let disc = Discretization::new(&Domain::unit_disk(), h, 1).unwrap();
            let exact = |k: usize| {
                let [x, y] = disc.grid.coords(k);
                x * x + y * y - 1.0
            };
            let u: Vec<f64> = (0..disc.grid.len()).map(|k| if disc.interior[k] { exact(k) } else { 0.0 }).collect();
            let ext = disc.ghost_extend(&u, 0.0);
            for k in 0..disc.grid.len() {
                if !disc.interior[k] && ext[k] != 0.0 {
                    assert!((ext[k] - exact(k)).abs() < 2.0 * h * h, "{} vs {}", ext[k], exact(k));
                }
            }
        }
    }
}
