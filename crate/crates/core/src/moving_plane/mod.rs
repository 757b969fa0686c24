//! Moving-plane objects on solved grid fields: reflections `u_λ`, the
//! differences `U_λ = u_λ − u`, the mean-value linearization and the
//! certificates built from them.
//!
//! Off-grid reflections are read by bilinear interpolation of the field
//! extended one layer past the boundary, so every residual carries an
//! `O(h²)` floor.

mod certify;
mod linearize;

pub use certify::*;
pub use linearize::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{Discretization, GridSolution};
use crate::geometry::{check_unit, Domain};
use crate::linalg::Mat;
use crate::par;

/// How node Hessians are reconstructed from a grid field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// `Δ_v⁺ v̂v̂ᵀ + Δ_w⁺ ŵŵᵀ` from the active stencil pair, whose determinant
    /// is exactly the scheme's `MA_h`. The wide stencil's angular consistency
    /// error then stays out of `det D²u`.
    #[default]
    Scheme,
    /// Axis and diagonal centred differences, with cut arms at the boundary.
    Centered,
}

/// A grid solution paired with its domain, with per-node gradients and
/// Hessians precomputed for interpolation.
#[derive(Debug, Clone)]
pub struct SolutionView<'a> {
    pub solution: &'a GridSolution,
    pub disc: Discretization,
    pub mode: HessianMode,
    ext: Vec<Vec<f64>>,
    grad: Vec<Vec<[f64; 2]>>,
    /// `[u_xx, u_xy, u_yy]` per grid node.
    hess: Vec<Vec<[f64; 3]>>,
    /// Nodes carrying a gradient and Hessian: interior plus one ghost layer.
    valid: Vec<bool>,
}

fn dir_index(disc: &Discretization, d: [i64; 2]) -> usize {
    disc.stencil.dirs.iter().position(|e| *e == d).expect("width-1 stencil has both diagonals")
}

impl<'a> SolutionView<'a> {
    pub fn new(solution: &'a GridSolution, domain: &Domain) -> Result<Self> {
        Self::with_mode(solution, domain, HessianMode::Scheme)
    }

    pub fn with_mode(solution: &'a GridSolution, domain: &Domain, mode: HessianMode) -> Result<Self> {
        let disc = Discretization::on_grid(domain, solution.grid.clone(), solution.stencil_width)?;
        if disc.interior != solution.interior {
            return Err(Error::invalid("solution grid does not match the domain"));
        }
        let (dpp, dmp) = (dir_index(&disc, [1, 1]), dir_index(&disc, [-1, 1]));
        let len = disc.grid.len();
        let mut valid = disc.interior.clone();
        let mut ghost_count = vec![0u32; len];
        for &k in &disc.nodes {
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(e) = disc.grid.shifted(k, di, dj) {
                    if !disc.interior[e] {
                        ghost_count[e] += 1;
                    }
                }
            }
        }
        let mut ext = Vec::new();
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        for (u, &bc) in solution.fields.iter().zip(&solution.boundary_values) {
            ext.push(disc.ghost_extend(u, bc));
            let g = disc.gradients(u, bc);
            let hs = par::map_range(disc.num_interior(), |c| match mode {
                HessianMode::Centered => {
                    let xx = disc.second_difference(u, bc, c, 0);
                    let yy = disc.second_difference(u, bc, c, 1);
                    let xy = 0.5 * (disc.second_difference(u, bc, c, dpp) - disc.second_difference(u, bc, c, dmp));
                    [xx, xy, yy]
                }
                HessianMode::Scheme => {
                    let (_, p, dv, dw) = disc.ma_at(u, bc, c);
                    let (iv, iw) = disc.stencil.pairs[p];
                    let mut hm = [0.0; 3];
                    for (d, lam) in [(iv, dv.max(0.0)), (iw, dw.max(0.0))] {
                        let v = disc.stencil.dirs[d];
                        let (a, b) = (v[0] as f64, v[1] as f64);
                        let n2 = a * a + b * b;
                        hm[0] += lam * a * a / n2;
                        hm[1] += lam * a * b / n2;
                        hm[2] += lam * b * b / n2;
                    }
                    hm
                }
            });
            let mut gf = vec![[0.0; 2]; len];
            let mut hf = vec![[0.0; 3]; len];
            for (c, &k) in disc.nodes.iter().enumerate() {
                gf[k] = g[c];
                hf[k] = hs[c];
            }
            // ghost layer: mean of the interior axis neighbours
            for &k in &disc.nodes {
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if let Some(e) = disc.grid.shifted(k, di, dj) {
                        if !disc.interior[e] {
                            let w = 1.0 / ghost_count[e] as f64;
                            for q in 0..2 {
                                gf[e][q] += w * gf[k][q];
                            }
                            for q in 0..3 {
                                hf[e][q] += w * hf[k][q];
                            }
                        }
                    }
                }
            }
            grad.push(gf);
            hess.push(hf);
        }
        for k in 0..len {
            valid[k] |= ghost_count[k] > 0;
        }
        Ok(SolutionView {
            solution,
            disc,
            mode,
            ext,
            grad,
            hess,
            valid,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.disc.domain
    }

    pub fn h(&self) -> f64 {
        self.disc.h()
    }

    pub fn m(&self) -> usize {
        self.solution.m()
    }

    pub fn boundary_value(&self, i: usize) -> f64 {
        self.solution.boundary_values[i]
    }

    /// `uⁱ(p)`, interpolated; `None` off the extended field.
    pub fn value_at(&self, i: usize, p: [f64; 2]) -> Option<f64> {
        if self.disc.domain.level(&p) > 2.0 * self.h() {
            return None;
        }
        self.disc.interpolate(&self.ext[i], p)
    }

    pub fn gradient_at(&self, i: usize, p: [f64; 2]) -> Option<[f64; 2]> {
        let v = self.interp_valid(p, |k| {
            let g = self.grad[i][k];
            [g[0], g[1], 0.0]
        })?;
        Some([v[0], v[1]])
    }

    pub fn hessian_at(&self, i: usize, p: [f64; 2]) -> Option<Mat> {
        let v = self.interp_valid(p, |k| self.hess[i][k])?;
        Some(sym2(v))
    }

    pub fn node_gradient(&self, i: usize, k: usize) -> [f64; 2] {
        self.grad[i][k]
    }

    pub fn node_hessian(&self, i: usize, k: usize) -> Mat {
        sym2(self.hess[i][k])
    }

    /// Largest Hessian entry over nodes with uncut stencils.
    pub fn hessian_scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        for hf in &self.hess {
            for (c, &k) in self.disc.nodes.iter().enumerate() {
                if !self.disc.is_full(c) {
                    continue;
                }
                for v in hf[k] {
                    s = s.max(v.abs());
                }
            }
        }
        s
    }

    pub fn gradient_scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        for gf in &self.grad {
            for &k in &self.disc.nodes {
                s = s.max(gf[k][0].hypot(gf[k][1]));
            }
        }
        s
    }

    /// Bilinear interpolation over the valid corners of the containing cell,
    /// renormalized when some corners are missing.
    fn interp_valid(&self, p: [f64; 2], f: impl Fn(usize) -> [f64; 3]) -> Option<[f64; 3]> {
        let (i, j, fx, fy) = self.disc.grid.locate(p)?;
        let g = &self.disc.grid;
        let corners = [
            (g.index(i, j), (1.0 - fx) * (1.0 - fy)),
            (g.index(i + 1, j), fx * (1.0 - fy)),
            (g.index(i, j + 1), (1.0 - fx) * fy),
            (g.index(i + 1, j + 1), fx * fy),
        ];
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (k, w) in corners {
            if self.valid[k] && w > 0.0 {
                let v = f(k);
                for q in 0..3 {
                    acc[q] += w * v[q];
                }
                wsum += w;
            }
        }
        if wsum <= 0.0 {
            // p sits exactly on an invalid node
            let (k, _) = corners.iter().cloned().find(|(k, _)| self.valid[*k])?;
            return Some(f(k));
        }
        Some(acc.map(|a| a / wsum))
    }
}

fn sym2([xx, xy, yy]: [f64; 3]) -> Mat {
    Mat {
        n: 2,
        a: vec![xx, xy, xy, yy],
    }
}

pub(crate) fn reflect2(x: [f64; 2], nu: [f64; 2], lambda: f64) -> [f64; 2] {
    let s = 2.0 * (lambda - (x[0] * nu[0] + x[1] * nu[1]));
    [x[0] + s * nu[0], x[1] + s * nu[1]]
}

pub(crate) fn unit2(nu: &[f64]) -> Result<[f64; 2]> {
    if nu.len() != 2 {
        return Err(Error::invalid("grid diagnostics need a 2-D direction"));
    }
    check_unit(nu)?;
    Ok([nu[0], nu[1]])
}

/// Reflection data for one plane `T_λ = {x·ν = λ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingPlaneFrame {
    pub direction: [f64; 2],
    pub lambda: f64,
    /// Interior grid nodes with `x·ν < λ`.
    pub sigma: Vec<usize>,
    /// Reflection of each `sigma` node.
    pub reflected: Vec<[f64; 2]>,
    /// Positions in `sigma` whose reflection leaves the domain.
    pub exits: Vec<usize>,
    /// Interior nodes on `T_λ`, where `U_λ = 0` by construction.
    pub on_plane: Vec<usize>,
    /// `u_λⁱ` per component at each `sigma` node.
    pub u_lambda: Vec<Vec<f64>>,
    /// `U_λⁱ = u_λⁱ − uⁱ` per component at each `sigma` node.
    pub big_u: Vec<Vec<f64>>,
}

impl MovingPlaneFrame {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Largest `U_λⁱ` over `sigma` nodes whose reflection stays inside, with
    /// its position in `sigma`.
    pub fn max_u(&self, i: usize) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (s, &v) in self.big_u[i].iter().enumerate() {
            if self.exits.binary_search(&s).is_ok() {
                continue;
            }
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, s));
            }
        }
        best
    }
}

/// Frame at `λ`; empty when `λ ≤ λ₀`.
pub fn build_frame(view: &SolutionView, nu: &[f64], lambda: f64) -> Result<MovingPlaneFrame> {
    let nu = unit2(nu)?;
    let disc = &view.disc;
    let h = view.h();
    let tol = 1e-9 * h;
    let mut sigma = Vec::new();
    let mut on_plane = Vec::new();
    for &k in &disc.nodes {
        let x = disc.grid.coords(k);
        let s = x[0] * nu[0] + x[1] * nu[1] - lambda;
        if s < -tol {
            sigma.push(k);
        } else if s.abs() <= tol {
            on_plane.push(k);
        }
    }
    let reflected: Vec<[f64; 2]> = sigma.iter().map(|&k| reflect2(disc.grid.coords(k), nu, lambda)).collect();
    let exits: Vec<usize> = (0..sigma.len())
        .filter(|&s| view.domain().level(&reflected[s]) > tol)
        .collect();
    let m = view.m();
    let mut u_lambda = Vec::with_capacity(m);
    let mut big_u = Vec::with_capacity(m);
    for i in 0..m {
        let bc = view.boundary_value(i);
        let ul: Vec<f64> = par::map_range(sigma.len(), |s| view.value_at(i, reflected[s]).unwrap_or(bc));
        let bu: Vec<f64> = ul.iter().zip(&sigma).map(|(a, &k)| a - view.solution.fields[i][k]).collect();
        u_lambda.push(ul);
        big_u.push(bu);
    }
    Ok(MovingPlaneFrame {
        direction: nu,
        lambda,
        sigma,
        reflected,
        exits,
        on_plane,
        u_lambda,
        big_u,
    })
}

/// Gradient and Hessian `[xx, xy, yy]` of the reflected field `u_λⁱ` at grid
/// node `k`, by centred differences of interpolated values.
pub fn reflected_derivatives(
    view: &SolutionView,
    i: usize,
    nu: &[f64],
    lambda: f64,
    k: usize,
) -> Result<Option<([f64; 2], [f64; 3])>> {
    let nu = unit2(nu)?;
    let h = view.h();
    let x = view.disc.grid.coords(k);
    let val = |dx: f64, dy: f64| view.value_at(i, reflect2([x[0] + dx * h, x[1] + dy * h], nu, lambda));
    let (Some(c), Some(e), Some(w), Some(n), Some(s)) = (val(0., 0.), val(1., 0.), val(-1., 0.), val(0., 1.), val(0., -1.))
    else {
        return Ok(None);
    };
    let (Some(ne), Some(nw), Some(se), Some(sw)) = (val(1., 1.), val(-1., 1.), val(1., -1.), val(-1., -1.)) else {
        return Ok(None);
    };
    let g = [(e - w) / (2.0 * h), (n - s) / (2.0 * h)];
    let hs = [
        (e - 2.0 * c + w) / (h * h),
        (ne - nw - se + sw) / (4.0 * h * h),
        (n - 2.0 * c + s) / (h * h),
    ];
    Ok(Some((g, hs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{solve_scalar_fd, FdParams, FnField};

    fn field_solution(domain: &Domain, h: f64, f: impl Fn([f64; 2]) -> f64) -> GridSolution {
        let disc = Discretization::new(domain, h, 1).unwrap();
        let u: Vec<f64> = (0..disc.grid.len())
            .map(|k| if disc.interior[k] { f(disc.grid.coords(k)) } else { 0.0 })
            .collect();
        GridSolution::from_fields(&disc, vec![u], vec![0.0])
    }

    #[test]
    fn symmetric_field_gives_zero_difference() {
        let d = Domain::unit_disk();
        let sol = solve_scalar_fd(&d, &FnField(|_| 4.0), 0.0, &FdParams::with_h(1.0 / 32.0)).unwrap();
        let view = SolutionView::new(&sol.solution, &d).unwrap();
        let fr = build_frame(&view, &[1.0, 0.0], 0.0).unwrap();
        assert!(fr.exits.is_empty());
        for v in &fr.big_u[0] {
            assert!(v.abs() < 1e-9);
        }
        assert!(!fr.on_plane.is_empty());
    }

    #[test]
    fn linear_field_difference_is_closed_form() {
        let d = Domain::unit_disk();
        let sol = field_solution(&d, 1.0 / 16.0, |x| x[0]);
        let view = SolutionView::new(&sol, &d).unwrap();
        let fr = build_frame(&view, &[1.0, 0.0], 0.0).unwrap();
        for (s, &k) in fr.sigma.iter().enumerate() {
            let x = view.disc.grid.coords(k);
            assert!((fr.big_u[0][s] + 2.0 * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_below_first_touch() {
        let d = Domain::unit_disk();
        let sol = field_solution(&d, 0.125, |x| x[0]);
        let view = SolutionView::new(&sol, &d).unwrap();
        assert!(build_frame(&view, &[1.0, 0.0], -1.0).unwrap().is_empty());
        assert!(build_frame(&view, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let sol = field_solution(&Domain::unit_disk(), 0.125, |x| x[0]);
        assert!(SolutionView::new(&sol, &Domain::ellipse(vec![0.0, 0.0], vec![1.0, 0.5])).is_err());
    }
}
