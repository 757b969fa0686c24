//! Mean-value linearization `det D²u_λ − det D²u = tr(A D²U_λ)` and the
//! elliptic-inequality audit built on it.

use serde::{Deserialize, Serialize};

use super::{unit2, MovingPlaneFrame, SolutionView};
use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre01, Mat};
use crate::par;
use crate::rhs::RhsSystem;

/// `∂ det M / ∂m_jk`, the cofactor matrix `adj(M)ᵀ`. For invertible `M` this
/// is `det(M)·M^{-T}`.
pub fn det_gradient(m: &Mat) -> Mat {
    m.adjugate().transpose()
}

/// `A = ∫₀¹ adj(M_t) dt` with `M_t = (1−t) H_λ + t H`, by Gauss–Legendre of
/// the given order. The entries of `adj(M_t)` are polynomials of degree
/// `n − 1` in `t`, so any order `≥ n/2` is exact. The flag is raised when
/// some sampled `M_t` is not positive definite; `A` is then symmetrized.
pub fn mean_value_matrix(h_lambda: &Mat, h: &Mat, order: usize) -> (Mat, bool) {
    let n = h.n;
    let (ts, ws) = gauss_legendre01(order.max(1));
    let mut a = Mat::zeros(n);
    let mut flagged = false;
    for (t, w) in ts.iter().zip(&ws) {
        let mt = h_lambda.add_scaled(-*t, h_lambda).add_scaled(*t, h);
        if !mt.is_positive_definite() {
            flagged = true;
        }
        a = a.add_scaled(*w, &mt.adjugate());
    }
    if flagged {
        a = a.add_scaled(1.0, &a.transpose());
        a.a.iter_mut().for_each(|v| *v *= 0.5);
    }
    (a, flagged)
}

/// `|tr(A (H_λ − H)) − (det H_λ − det H)|` relative to `max(1, |det H_λ|, |det H|)`.
pub fn mean_value_residual(h_lambda: &Mat, h: &Mat, a: &Mat) -> f64 {
    let diff = h_lambda.add_scaled(-1.0, h);
    let lhs = a.frobenius(&diff.transpose());
    let rhs = h_lambda.det() - h.det();
    (lhs - rhs).abs() / 1f64.max(h_lambda.det().abs()).max(h.det().abs())
}

pub fn default_quad_order(n: usize) -> usize {
    4.max(n + 1)
}

/// Linearization of one component at the `sigma` nodes of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLinearization {
    pub a: Vec<Mat>,
    pub b: Vec<[f64; 2]>,
    /// Lipschitz constant of the Lipschitz split part in `zⁱ`, the largest
    /// local estimate over the nodes.
    pub c: f64,
    /// `d_ij` per node and `j`.
    pub d: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
    pub hess_u: Vec<Mat>,
    pub hess_u_lambda: Vec<Mat>,
    pub grad_big_u: Vec<[f64; 2]>,
    pub mean_value_residual: Vec<f64>,
    /// `∂_ν uⁱ ≤ 0`, the standing assumption of the inequality.
    pub monotone: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationFields {
    pub direction: [f64; 2],
    pub lambda: f64,
    pub quad_order: usize,
    /// Grid nodes, the frame's `sigma` minus reflections that exit.
    pub nodes: Vec<usize>,
    /// Position of each node in the frame's `sigma`.
    pub sigma_pos: Vec<usize>,
    pub components: Vec<ComponentLinearization>,
}

impl LinearizationFields {
    pub fn flagged_count(&self) -> usize {
        self.components.iter().map(|c| c.flagged.iter().filter(|f| **f).count()).sum()
    }

    pub fn max_mean_value_residual(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.mean_value_residual.iter().cloned())
            .fold(0.0, f64::max)
    }

    /// Number of `d_ij > 0` with `i ≠ j`.
    pub fn positive_off_diagonal(&self) -> usize {
        let mut n = 0;
        for (i, c) in self.components.iter().enumerate() {
            for row in &c.d {
                n += row.iter().enumerate().filter(|(j, v)| *j != i && **v > 0.0).count();
            }
        }
        n
    }
}

/// `D²u_λ(x) = R D²u(x_λ) R` and `∇u_λ(x) = R ∇u(x_λ)`, `R = I − 2νν^T`.
fn reflected_jet(view: &SolutionView, i: usize, nu: [f64; 2], xr: [f64; 2]) -> Option<([f64; 2], Mat)> {
    let g = view.gradient_at(i, xr)?;
    let hm = view.hessian_at(i, xr)?;
    let r = Mat {
        n: 2,
        a: vec![
            1.0 - 2.0 * nu[0] * nu[0],
            -2.0 * nu[0] * nu[1],
            -2.0 * nu[0] * nu[1],
            1.0 - 2.0 * nu[1] * nu[1],
        ],
    };
    let gr = [
        r.get(0, 0) * g[0] + r.get(0, 1) * g[1],
        r.get(1, 0) * g[0] + r.get(1, 1) * g[1],
    ];
    Some((gr, r.mul(&hm).mul(&r)))
}

pub fn linearize(
    view: &SolutionView,
    frame: &MovingPlaneFrame,
    sys: &RhsSystem,
    quad_order: usize,
) -> Result<LinearizationFields> {
    let m = view.m();
    if sys.m() != m || sys.dim() != 2 {
        return Err(Error::invalid("system does not match the solution"));
    }
    let nu = unit2(&frame.direction)?;
    let sigma_pos: Vec<usize> = (0..frame.len()).filter(|s| frame.exits.binary_search(s).is_err()).collect();
    let nodes: Vec<usize> = sigma_pos.iter().map(|&s| frame.sigma[s]).collect();
    let grid = &view.disc.grid;
    let mut components = Vec::with_capacity(m);
    for i in 0..m {
        let rows = par::map_slice(&sigma_pos, |&s| -> Result<_> {
            let k = frame.sigma[s];
            let x = grid.coords(k);
            let hu = view.node_hessian(i, k);
            let gu = view.node_gradient(i, k);
            let (gl, hl) = reflected_jet(view, i, nu, frame.reflected[s]).unwrap_or((gu, hu.clone()));
            let (a, flagged) = mean_value_matrix(&hl, &hu, quad_order);
            let gbu = [gl[0] - gu[0], gl[1] - gu[1]];
            let u_now: Vec<f64> = (0..m).map(|j| view.solution.fields[j][k]).collect();
            let u_lam: Vec<f64> = (0..m).map(|j| frame.u_lambda[j][s]).collect();
            let hp = sys.lipschitz_p(i, &x, &u_now, &gl)?;
            let nb = gbu[0].hypot(gbu[1]);
            let b = if nb > 0.0 { [hp * gbu[0] / nb, hp * gbu[1] / nb] } else { [0.0; 2] };
            let c = sys.lipschitz_z(i, &x, &u_now, &gl)?;
            let mut d = Vec::with_capacity(m);
            for j in 0..m {
                // components before j reflected, from j on original
                let z: Vec<f64> = (0..m).map(|q| if q < j { u_lam[q] } else { u_now[q] }).collect();
                let dij = if i == j && !sys.has_split(i) {
                    0.0
                } else {
                    sys.d_ij(i, j, &x, &z, &gl, frame.big_u[j][s])?
                };
                d.push(dij);
            }
            let mv = mean_value_residual(&hl, &hu, &a);
            let mono = gu[0] * nu[0] + gu[1] * nu[1] <= 0.0;
            Ok((a, b, c, d, flagged, hu, hl, gbu, mv, mono))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut comp = ComponentLinearization {
            a: Vec::new(),
            b: Vec::new(),
            c: 0.0,
            d: Vec::new(),
            flagged: Vec::new(),
            hess_u: Vec::new(),
            hess_u_lambda: Vec::new(),
            grad_big_u: Vec::new(),
            mean_value_residual: Vec::new(),
            monotone: Vec::new(),
        };
        for (a, b, c, d, flagged, hu, hl, gbu, mv, mono) in rows {
            comp.a.push(a);
            comp.b.push(b);
            comp.c = comp.c.max(c);
            comp.d.push(d);
            comp.flagged.push(flagged);
            comp.hess_u.push(hu);
            comp.hess_u_lambda.push(hl);
            comp.grad_big_u.push(gbu);
            comp.mean_value_residual.push(mv);
            comp.monotone.push(mono);
        }
        components.push(comp);
    }
    Ok(LinearizationFields {
        direction: nu,
        lambda: frame.lambda,
        quad_order,
        nodes,
        sigma_pos,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityWitness {
    pub node: usize,
    pub point: [f64; 2],
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub tested: usize,
    /// Nodes where `∂_ν uⁱ > 0`, outside the inequality's hypothesis.
    pub skipped: usize,
    pub violations: usize,
    /// Smallest `lhs − rhs + tolerance`; negative exactly when violated.
    pub worst_margin: f64,
    pub tolerance_factor: f64,
    pub max_mean_value_residual: f64,
    pub flagged: usize,
    pub positive_off_diagonal: usize,
    /// Up to ten violations, worst first.
    pub witnesses: Vec<InequalityWitness>,
}

/// Evaluates `tr(A D²U) + B·∇U + cU ≥ Σ_j d_ij U^j` at every linearized
/// node; a violation is a shortfall beyond `factor · h² · max(1, |det D²u|,
/// |det D²u_λ|)`.
pub fn verify_elliptic_inequality(
    fields: &LinearizationFields,
    frame: &MovingPlaneFrame,
    view: &SolutionView,
    factor: f64,
) -> InequalityReport {
    let h = view.h();
    let mut tested = 0;
    let mut skipped = 0;
    let mut worst_margin = f64::INFINITY;
    let mut all: Vec<InequalityWitness> = Vec::new();
    for (i, comp) in fields.components.iter().enumerate() {
        for (q, &k) in fields.nodes.iter().enumerate() {
            if !comp.monotone[q] {
                skipped += 1;
                continue;
            }
            tested += 1;
            let s = fields.sigma_pos[q];
            let d2u = comp.hess_u_lambda[q].add_scaled(-1.0, &comp.hess_u[q]);
            let ui = frame.big_u[i][s];
            let g = comp.grad_big_u[q];
            let lhs = comp.a[q].frobenius(&d2u.transpose()) + comp.b[q][0] * g[0] + comp.b[q][1] * g[1] + comp.c * ui;
            let rhs: f64 = comp.d[q].iter().enumerate().map(|(j, d)| d * frame.big_u[j][s]).sum();
            let scale = 1f64.max(comp.hess_u[q].det().abs()).max(comp.hess_u_lambda[q].det().abs());
            let tol = factor * h * h * scale;
            let margin = lhs - rhs + tol;
            worst_margin = worst_margin.min(margin);
            if margin < 0.0 {
                all.push(InequalityWitness {
                    node: k,
                    point: view.disc.grid.coords(k),
                    component: i,
                    lhs,
                    rhs,
                    tolerance: tol,
                });
            }
        }
    }
    let violations = all.len();
    all.sort_by(|a, b| (a.lhs - a.rhs + a.tolerance).total_cmp(&(b.lhs - b.rhs + b.tolerance)));
    all.truncate(10);
    InequalityReport {
        tested,
        skipped,
        violations,
        worst_margin: if tested == 0 { 0.0 } else { worst_margin },
        tolerance_factor: factor,
        max_mean_value_residual: fields.max_mean_value_residual(),
        flagged: fields.flagged_count(),
        positive_off_diagonal: fields.positive_off_diagonal(),
        witnesses: all,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair() {
        let i2 = Mat::identity(2);
        let (a, f) = mean_value_matrix(&i2, &i2, 4);
        assert!(!f);
        assert!(a.add_scaled(-1.0, &i2).max_abs() < 1e-14);
    }

    #[test]
    fn quadratic_pair_is_exact() {
        for n in [2, 3] {
            let h = Mat::identity(n).add_scaled(1.0, &Mat::identity(n));
            let hl = Mat::identity(n);
            let (a, _) = mean_value_matrix(&hl, &h, default_quad_order(n));
            assert!(mean_value_residual(&hl, &h, &a) < 1e-12);
        }
    }

    #[test]
    fn indefinite_samples_are_flagged() {
        let h = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let (a, f) = mean_value_matrix(&Mat::identity(2), &h, 4);
        assert!(f);
        assert!(a.is_symmetric(1e-14));
    }
}
