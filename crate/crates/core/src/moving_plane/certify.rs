//! Certificates: monotonicity in `{x·ν < Λ₀}`, reflection symmetry, boundary
//! signs and the λ sweep. Strict inequalities are certified with a margin
//! `10 h² · scale` that is always reported.

use serde::{Deserialize, Serialize};

use super::{build_frame, linearize, unit2, verify_elliptic_inequality, InequalityReport, SolutionView};
use crate::error::Result;
use crate::geometry::{CriticalPlanes, Domain};
use crate::par;
use crate::radial::RadialProfile;
use crate::rhs::RhsSystem;

pub const MARGIN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWitness {
    pub node: usize,
    pub point: [f64; 2],
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub pass: bool,
    pub tested: usize,
    /// Nodes with `∂_ν uⁱ > −margin`.
    pub strict_violations: usize,
    /// Nodes with `∂_ν uⁱ > 0`.
    pub sign_violations: usize,
    pub margin: f64,
    /// Node with the largest `∂_ν uⁱ`.
    pub worst: Option<NodeWitness>,
}

/// `∂_ν uⁱ < −margin` at interior nodes with `x·ν < Λ₀ − h`; the default
/// margin is `10 h² · max |∇u|`, which scales with the solution so shallow
/// fields are not penalised.
pub fn certify_monotonicity(
    view: &SolutionView,
    nu: &[f64],
    planes: &CriticalPlanes,
    margin: Option<f64>,
) -> Result<MonotonicityVerdict> {
    let nu = unit2(nu)?;
    let h = view.h();
    let margin = margin.unwrap_or(MARGIN_FACTOR * h * h * view.gradient_scale());
    let grid = &view.disc.grid;
    let mut tested = 0;
    let mut strict = 0;
    let mut sign = 0;
    let mut worst: Option<NodeWitness> = None;
    for i in 0..view.m() {
        for &k in &view.disc.nodes {
            let x = grid.coords(k);
            if x[0] * nu[0] + x[1] * nu[1] >= planes.cap_lambda0 - h {
                continue;
            }
            tested += 1;
            let g = view.node_gradient(i, k);
            let d = g[0] * nu[0] + g[1] * nu[1];
            if d > -margin {
                strict += 1;
            }
            if d > 0.0 {
                sign += 1;
            }
            if worst.as_ref().is_none_or(|w| d > w.value) {
                worst = Some(NodeWitness {
                    node: k,
                    point: x,
                    component: i,
                    value: d,
                });
            }
        }
    }
    Ok(MonotonicityVerdict {
        pass: strict == 0,
        tested,
        strict_violations: strict,
        sign_violations: sign,
        margin,
        worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub applicable: bool,
    pub reason: Option<String>,
    /// `max |uⁱ(x) − uⁱ(x_{Λ₀})|` over interior nodes.
    pub residual: f64,
    pub worst: Option<NodeWitness>,
    /// Balls: largest `max_θ u − min_θ u` over sampled circles.
    pub angular_variation: Option<f64>,
    /// Tubes: largest mismatch between `u(r, xₙ)` and `u(−r, xₙ)`.
    pub axial_variation: Option<f64>,
    /// Bilinear interpolation floor `h² max |D²u| / 4`.
    pub floor: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Reflection residual about `{x·ν = Λ₀}` plus the rotational or axial
/// variant for balls and tubes. Not applicable on asymmetric domains.
pub fn certify_symmetry(view: &SolutionView, nu: &[f64], cap_lambda0: f64, tol: f64) -> Result<SymmetryReport> {
    let nu2 = unit2(nu)?;
    let h = view.h();
    let floor = h * h * view.hessian_scale() / 4.0;
    let domain = view.domain();
    if !domain.is_symmetric_about(nu, cap_lambda0, 1e-9 * domain.diameter().max(1.0)) {
        return Ok(SymmetryReport {
            applicable: false,
            reason: Some(format!("domain is not symmetric about x·ν = {cap_lambda0}")),
            residual: 0.0,
            worst: None,
            angular_variation: None,
            axial_variation: None,
            floor,
            tol,
            pass: false,
        });
    }
    let grid = &view.disc.grid;
    let mut residual: f64 = 0.0;
    let mut worst = None;
    for i in 0..view.m() {
        let res = par::map_slice(&view.disc.nodes, |&k| {
            let x = grid.coords(k);
            let xr = super::reflect2(x, nu2, cap_lambda0);
            view.value_at(i, xr).map_or(0.0, |v| (v - view.solution.fields[i][k]).abs())
        });
        for (q, r) in res.into_iter().enumerate() {
            if r > residual {
                residual = r;
                let k = view.disc.nodes[q];
                worst = Some(NodeWitness {
                    node: k,
                    point: grid.coords(k),
                    component: i,
                    value: r,
                });
            }
        }
    }
    let angular_variation = match domain {
        Domain::Ball { center, radius } => Some(angular_variation(view, [center[0], center[1]], *radius)),
        _ => None,
    };
    let axial_variation = match domain {
        Domain::Tube { .. } => Some(axial_variation(view)),
        _ => None,
    };
    let pass = residual <= tol && angular_variation.is_none_or(|a| a <= tol);
    Ok(SymmetryReport {
        applicable: true,
        reason: None,
        residual,
        worst,
        angular_variation,
        axial_variation,
        floor,
        tol,
        pass,
    })
}

/// `max_r (max_θ u − min_θ u)` over circles of radius `h, 2h, …` strictly
/// inside the ball, largest over components.
pub fn angular_variation(view: &SolutionView, center: [f64; 2], radius: f64) -> f64 {
    let h = view.h();
    let n_r = ((radius / h).floor() as usize).saturating_sub(1);
    let radii: Vec<f64> = (1..=n_r).map(|q| q as f64 * h).collect();
    let n_theta = (8.0 * (std::f64::consts::TAU * radius / h).ceil()) as usize;
    let mut var: f64 = 0.0;
    for i in 0..view.m() {
        let per_r = par::map_slice(&radii, |&r| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for q in 0..n_theta {
                let th = q as f64 * std::f64::consts::TAU / n_theta as f64;
                if let Some(v) = view.value_at(i, [center[0] + r * th.cos(), center[1] + r * th.sin()]) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi >= lo {
                hi - lo
            } else {
                0.0
            }
        });
        var = per_r.into_iter().fold(var, f64::max);
    }
    var
}

/// For a 2-D tube about the `x₂` axis: `max |u(r, x₂) − u(−r, x₂)|` over
/// interior nodes.
fn axial_variation(view: &SolutionView) -> f64 {
    let grid = &view.disc.grid;
    let mut var: f64 = 0.0;
    for i in 0..view.m() {
        for &k in &view.disc.nodes {
            let x = grid.coords(k);
            if let Some(v) = view.value_at(i, [-x[0], x[1]]) {
                var = var.max((v - view.solution.fields[i][k]).abs());
            }
        }
    }
    var
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerReport {
    /// Corner point and `sign(x₂) · ∂²u/∂x₁∂x₂` there, per component.
    pub values: Vec<([f64; 2], Vec<f64>)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub hopf_min: f64,
    pub hopf_witness: Option<NodeWitness>,
    pub hopf_samples: usize,
    pub hopf_pass: bool,
    pub laplacian_min: f64,
    pub laplacian_witness: Option<NodeWitness>,
    pub laplacian_pass: bool,
    pub corner: Option<CornerReport>,
    pub corner_note: Option<String>,
}

/// Outward normal derivative at sampled boundary points, the discrete
/// Laplacian at interior nodes and, on 2-D tubes, the cross derivative at
/// the corners of the first-touch face.
pub fn boundary_checks(view: &SolutionView) -> Result<BoundaryReport> {
    let h = view.h();
    let domain = view.domain();
    let delta = 3.0 * h;
    let samples = domain.boundary_samples(h);
    let mut hopf_min = f64::INFINITY;
    let mut hopf_witness = None;
    let mut count = 0;
    for i in 0..view.m() {
        let c = view.boundary_value(i);
        for b in &samples {
            let p1 = [b.point[0] - delta * b.normal[0], b.point[1] - delta * b.normal[1]];
            let p2 = [b.point[0] - 2.0 * delta * b.normal[0], b.point[1] - 2.0 * delta * b.normal[1]];
            if !(domain.level(&p1) < 0.0 && domain.level(&p2) < 0.0) {
                continue;
            }
            let (Some(u1), Some(u2)) = (view.value_at(i, p1), view.value_at(i, p2)) else {
                continue;
            };
            count += 1;
            let d = (3.0 * c - 4.0 * u1 + u2) / (2.0 * delta);
            if d < hopf_min {
                hopf_min = d;
                hopf_witness = Some(NodeWitness {
                    node: usize::MAX,
                    point: [b.point[0], b.point[1]],
                    component: i,
                    value: d,
                });
            }
        }
    }
    let mut lap_min = f64::INFINITY;
    let mut lap_witness = None;
    for i in 0..view.m() {
        let bc = view.boundary_value(i);
        let u = &view.solution.fields[i];
        for (c, &k) in view.disc.nodes.iter().enumerate() {
            let l = view.disc.laplacian(u, bc, c);
            if l < lap_min {
                lap_min = l;
                lap_witness = Some(NodeWitness {
                    node: k,
                    point: view.disc.grid.coords(k),
                    component: i,
                    value: l,
                });
            }
        }
    }
    let (corner, corner_note) = match domain {
        Domain::Tube {
            cross_section,
            half_height,
        } if cross_section.dim() == 1 => (Some(corner_check(view, domain, *half_height, delta)), None),
        Domain::Tube { .. } => (None, Some("corner check needs a 2-D tube".to_string())),
        _ => (None, Some("not a tube domain".to_string())),
    };
    Ok(BoundaryReport {
        hopf_min,
        hopf_witness,
        hopf_samples: count,
        hopf_pass: count > 0 && hopf_min > 0.0,
        laplacian_min: lap_min,
        laplacian_witness: lap_witness,
        laplacian_pass: lap_min > 0.0,
        corner,
        corner_note,
    })
}

/// Corners `(λ₀, ±H)` of the face touched first by planes moving in `+x₁`.
/// With `u = c` on both edges the cross difference reduces to
/// `±(c − u(λ₀ + δ, ±(H − δ)))/δ²` in the limit, but all four points are
/// read from the field.
fn corner_check(view: &SolutionView, domain: &Domain, half_height: f64, delta: f64) -> CornerReport {
    let x0 = domain.support_min(&[1.0, 0.0]);
    let mut values = Vec::new();
    let mut pass = true;
    for s in [1.0, -1.0] {
        let y0 = s * half_height;
        let corner = [x0, y0];
        let vals: Vec<f64> = (0..view.m())
            .map(|i| {
                let c = view.boundary_value(i);
                let at = |p: [f64; 2]| if domain.level(&p) >= 0.0 { c } else { view.value_at(i, p).unwrap_or(c) };
                let dy = -s * delta;
                let q = (at([x0 + delta, y0 + dy]) - at([x0, y0 + dy]) - at([x0 + delta, y0]) + at([x0, y0])) / (delta * dy);
                s * q
            })
            .collect();
        pass &= vals.iter().all(|v| *v > 0.0);
        values.push((corner, vals));
    }
    CornerReport { values, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub sigma_nodes: usize,
    pub exits: usize,
    /// Largest `U_λⁱ` per component.
    pub max_u: Vec<f64>,
    pub worst: Option<NodeWitness>,
    pub pass: bool,
    pub inequality: Option<InequalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingPlaneReport {
    pub direction: [f64; 2],
    pub planes: CriticalPlanes,
    pub h: f64,
    /// `U_λ ≤ tolerance` is required on every frame.
    pub tolerance: f64,
    pub entries: Vec<SweepEntry>,
    pub all_pass: bool,
    pub inequality_violations: usize,
    pub monotonicity: Option<MonotonicityVerdict>,
    pub symmetry: Option<SymmetryReport>,
    pub boundary: Option<BoundaryReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub n_lambdas: usize,
    /// `U_λ ≤ factor · h² · max(1, max |D²u|)`.
    pub tolerance_factor: f64,
    /// Shortfall allowance of the inequality audit, in units of `h²`.
    pub inequality_factor: f64,
    pub quad_order: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_lambdas: 16,
            tolerance_factor: MARGIN_FACTOR,
            inequality_factor: MARGIN_FACTOR,
            quad_order: None,
        }
    }
}

/// Frames at `λ_k = λ₀ + k(Λ₀ − λ₀)/n`, `k = 1..n`, each certified by
/// `max U_λ ≤ tolerance`; with a system, also the elliptic-inequality audit.
pub fn lambda_sweep(
    view: &SolutionView,
    nu: &[f64],
    planes: &CriticalPlanes,
    sys: Option<&RhsSystem>,
    opts: &SweepOptions,
) -> Result<MovingPlaneReport> {
    let nu2 = unit2(nu)?;
    let n = opts.n_lambdas.max(2);
    let h = view.h();
    let tolerance = opts.tolerance_factor * h * h * view.hessian_scale().max(1.0);
    let lambdas: Vec<f64> = (1..=n)
        .map(|k| planes.lambda0 + (planes.cap_lambda0 - planes.lambda0) * k as f64 / n as f64)
        .collect();
    let quad = opts.quad_order.unwrap_or(super::default_quad_order(2));
    let entries = par::map_slice(&lambdas, |&lambda| -> Result<SweepEntry> {
        let frame = build_frame(view, nu, lambda)?;
        let mut max_u = Vec::with_capacity(view.m());
        let mut worst: Option<NodeWitness> = None;
        for i in 0..view.m() {
            match frame.max_u(i) {
                Some((v, s)) => {
                    max_u.push(v);
                    if worst.as_ref().is_none_or(|w| v > w.value) {
                        let k = frame.sigma[s];
                        worst = Some(NodeWitness {
                            node: k,
                            point: view.disc.grid.coords(k),
                            component: i,
                            value: v,
                        });
                    }
                }
                None => max_u.push(f64::NEG_INFINITY),
            }
        }
        let inequality = match sys {
            Some(sys) => {
                let lin = linearize(view, &frame, sys, quad)?;
                Some(verify_elliptic_inequality(&lin, &frame, view, opts.inequality_factor))
            }
            None => None,
        };
        let pass = worst.as_ref().is_none_or(|w| w.value <= tolerance);
        Ok(SweepEntry {
            lambda,
            sigma_nodes: frame.len(),
            exits: frame.exits.len(),
            max_u,
            worst,
            pass,
            inequality,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let all_pass = entries.iter().all(|e| e.pass);
    let inequality_violations = entries.iter().filter_map(|e| e.inequality.as_ref()).map(|r| r.violations).sum();
    Ok(MovingPlaneReport {
        direction: nu2,
        planes: planes.clone(),
        h,
        tolerance,
        entries,
        all_pass,
        inequality_violations,
        monotonicity: None,
        symmetry: None,
        boundary: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMonotonicity {
    pub pass: bool,
    /// Smallest `u'(r)` over nodes with `r > 0`.
    pub min_derivative: f64,
    pub at_radius: f64,
}

/// `u'(r) > 0` for `r > 0`; the centre, where `u'` vanishes, is excluded.
pub fn certify_radial_increasing(profile: &RadialProfile) -> RadialMonotonicity {
    let mut min = f64::INFINITY;
    let mut at = 0.0;
    for (r, d) in profile.r.iter().zip(&profile.du).skip(1) {
        if *d < min {
            min = *d;
            at = *r;
        }
    }
    RadialMonotonicity {
        pass: min > 0.0,
        min_derivative: min,
        at_radius: at,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{Discretization, GridSolution};
    use crate::geometry::critical_planes;

    fn field(domain: &Domain, h: f64, f: impl Fn([f64; 2]) -> f64) -> GridSolution {
        let disc = Discretization::new(domain, h, 1).unwrap();
        let u: Vec<f64> = (0..disc.grid.len())
            .map(|k| if disc.interior[k] { f(disc.grid.coords(k)) } else { 0.0 })
            .collect();
        GridSolution::from_fields(&disc, vec![u], vec![0.0])
    }

    #[test]
    fn paraboloid_is_monotone_and_symmetric() {
        let d = Domain::unit_disk();
        let sol = field(&d, 1.0 / 64.0, |x| x[0] * x[0] + x[1] * x[1] - 1.0);
        let view = SolutionView::new(&sol, &d).unwrap();
        let planes = critical_planes(&d, &[1.0, 0.0], 1e-3).unwrap();
        assert!(certify_monotonicity(&view, &[1.0, 0.0], &planes, None).unwrap().pass);
        let s = certify_symmetry(&view, &[1.0, 0.0], 0.0, 1e-3).unwrap();
        assert!(s.pass && s.residual < 1e-12, "{s:?}");
        let b = boundary_checks(&view).unwrap();
        assert!((b.hopf_min - 2.0).abs() < 1e-2, "{}", b.hopf_min);
        assert!((b.laplacian_min - 4.0).abs() < 1e-9);
        assert!(b.corner.is_none());
    }

    #[test]
    fn linear_field_fails_with_witness() {
        let d = Domain::unit_disk();
        let sol = field(&d, 1.0 / 32.0, |x| x[0]);
        let view = SolutionView::new(&sol, &d).unwrap();
        let planes = critical_planes(&d, &[1.0, 0.0], 1e-3).unwrap();
        let v = certify_monotonicity(&view, &[1.0, 0.0], &planes, None).unwrap();
        assert!(!v.pass);
        assert!((v.worst.unwrap().value - 1.0).abs() < 1e-9);
        let rep = lambda_sweep(&view, &[1.0, 0.0], &planes, None, &SweepOptions::default()).unwrap();
        assert!(!rep.entries[0].pass, "{:?}", rep.entries[0]);
    }

    #[test]
    fn odd_field_is_not_symmetric() {
        let d = Domain::unit_disk();
        let sol = field(&d, 1.0 / 32.0, |x| x[0].powi(3));
        let view = SolutionView::new(&sol, &d).unwrap();
        let s = certify_symmetry(&view, &[1.0, 0.0], 0.0, 1e-3).unwrap();
        assert!(!s.pass);
        assert!(s.residual > 1.5, "{}", s.residual);
        let e = Domain::ellipse(vec![0.3, 0.0], vec![1.0, 0.5]);
        let sol = field(&e, 1.0 / 16.0, |x| x[0]);
        let view = SolutionView::new(&sol, &e).unwrap();
        assert!(!certify_symmetry(&view, &[1.0, 0.0], 0.0, 1e-3).unwrap().applicable);
    }

    #[test]
    fn zero_field_fails_hopf() {
        let d = Domain::unit_disk();
        let sol = field(&d, 1.0 / 16.0, |_| 0.0);
        let view = SolutionView::new(&sol, &d).unwrap();
        let b = boundary_checks(&view).unwrap();
        assert!(!b.hopf_pass && !b.laplacian_pass);
    }
}
