//! Radial reduction of the Monge-Ampère operator on balls.
//!
//! For `u(x) = u(r)`, `r = |x|`, the Hessian has eigenvalue `u″` once and
//! `u′/r` with multiplicity `n − 1`, so
//!
//! ```text
//! det D²u = u″ (u′/r)^{n−1},        ((u′)ⁿ)′ = n r^{n−1} det D²u.
//! ```
//!
//! A convex radial solution of `det D²u = g` with `u′(0) = 0` and `u(R) = c`
//! is therefore
//!
//! ```text
//! u′(r) = (∫₀ʳ n s^{n−1} g ds)^{1/n},      u(r) = c − ∫_r^R u′ ds.
//! ```
//!
//! The inner integral is taken exactly for piecewise-linear `g` on each cell,
//! so constant sources are reproduced to rounding. The outer integral is the
//! composite trapezoid rule.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{DivergenceReport, Error, Result};
use crate::expr::Expr;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    pub radius: f64,
    pub boundary_value: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl RadialProfile {
    /// Samples a closed-form profile on the uniform grid with `k` cells.
    pub fn from_fn(n: usize, radius: f64, k: usize, u: impl Fn(f64) -> f64, du: impl Fn(f64) -> f64) -> Self {
        let r = uniform_grid(radius, k);
        RadialProfile {
            n,
            radius,
            boundary_value: u(radius),
            u: r.iter().map(|&x| u(x)).collect(),
            du: r.iter().map(|&x| du(x)).collect(),
            r,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn center_value(&self) -> f64 {
        self.u[0]
    }

    /// Linear interpolation of `u` at radius `rho` (clamped to `[0, R]`).
    pub fn value_at(&self, rho: f64) -> f64 {
        interp(&self.r, &self.u, rho)
    }

    pub fn derivative_at(&self, rho: f64) -> f64 {
        interp(&self.r, &self.du, rho)
    }

    /// `max_k |u_k − v(r_k)|`.
    pub fn max_distance(&self, other: &RadialProfile) -> f64 {
        self.r
            .iter()
            .zip(&self.u)
            .map(|(&r, &u)| (u - other.value_at(r)).abs())
            .fold(0.0, f64::max)
    }
}

fn interp(r: &[f64], v: &[f64], rho: f64) -> f64 {
    let last = r.len() - 1;
    if rho <= r[0] {
        return v[0];
    }
    if rho >= r[last] {
        return v[last];
    }
    let k = r.partition_point(|&x| x <= rho).clamp(1, last);
    let t = (rho - r[k - 1]) / (r[k] - r[k - 1]);
    v[k - 1] + t * (v[k] - v[k - 1])
}

pub fn uniform_grid(radius: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| radius * i as f64 / k as f64).collect()
}

/// `u″(r_k) (u′(r_k)/r_k)^{n−1}` with `u″` from second differences of `u`
/// and `u′` from the profile. At `r = 0` the limit `u″(0)ⁿ` is used.
pub fn radial_ma_operator(profile: &RadialProfile, k: usize) -> f64 {
    let (r, u, n) = (&profile.r, &profile.u, profile.n as i32);
    let last = r.len() - 1;
    if k == 0 {
        // even extension u(−r₁) = u(r₁)
        let upp = 2.0 * (u[1] - u[0]) / (r[1] * r[1]);
        return upp.powi(n);
    }
    let upp = if k < last {
        let (h1, h2) = (r[k] - r[k - 1], r[k + 1] - r[k]);
        2.0 / (h1 + h2) * ((u[k + 1] - u[k]) / h2 - (u[k] - u[k - 1]) / h1)
    } else {
        // one-sided three-point second difference at the boundary
        let (h1, h2) = (r[k] - r[k - 1], r[k - 1] - r[k - 2]);
        2.0 / (h1 + h2) * ((u[k] - u[k - 1]) / h1 - (u[k - 1] - u[k - 2]) / h2)
    };
    upp * (profile.du[k] / r[k]).powi(n - 1)
}

/// `∫_a^b n s^{n−1} g(s) ds` for `g` linear between `ga` and `gb`.
fn cell_moment(n: i32, a: f64, b: f64, ga: f64, gb: f64) -> f64 {
    let bn = b.powi(n) - a.powi(n);
    let bn1 = b.powi(n + 1) - a.powi(n + 1);
    let slope = (gb - ga) / (b - a);
    ga * bn + slope * (n as f64 / (n as f64 + 1.0) * bn1 - a * bn)
}

/// Integrates `g` (nodal values on `r`) into `(u, u′)` with `u(R) = c`.
pub fn integrate_source(n: usize, r: &[f64], g: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let len = r.len();
    let ni = n as i32;
    let mut du = vec![0.0; len];
    let mut acc = 0.0;
    for k in 1..len {
        acc += cell_moment(ni, r[k - 1], r[k], g[k - 1], g[k]);
        du[k] = acc.max(0.0).powf(1.0 / n as f64);
    }
    let mut u = vec![c; len];
    for k in (0..len - 1).rev() {
        u[k] = u[k + 1] - 0.5 * (du[k] + du[k + 1]) * (r[k + 1] - r[k]);
    }
    (u, du)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialOptions {
    /// Number of cells of the uniform radius grid.
    pub grid_size: usize,
    /// Relative L∞ change of the iterate that stops the fixed point.
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            grid_size: 2048,
            tol: 1e-10,
            damping: 0.5,
            max_iter: 10_000,
        }
    }
}

impl RadialOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 4 || !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) || self.max_iter == 0 {
            return Err(Error::invalid("radial options need grid_size ≥ 4, tol > 0, damping in (0, 1], max_iter ≥ 1"));
        }
        Ok(())
    }
}

/// Radial source `g(r, u, u′)`.
pub trait RadialSource: Sync {
    fn eval(&self, r: f64, u: f64, du: f64) -> Result<f64>;
    /// Whether `g` reads `u` or `u′`; otherwise one pass suffices.
    fn depends_on_solution(&self) -> bool {
        true
    }
}

/// Source given as an expression in `x1 = r`, `z1 = u`, `p1 = u′`.
#[derive(Debug, Clone)]
pub struct ExprSource(pub Expr);

impl RadialSource for ExprSource {
    fn eval(&self, r: f64, u: f64, du: f64) -> Result<f64> {
        self.0.eval(&[r], &[u], &[du])
    }

    fn depends_on_solution(&self) -> bool {
        let (_, z, p) = self.0.arity();
        z > 0 || p > 0
    }
}

/// Source depending on `r` only.
pub struct FnSource<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> RadialSource for FnSource<F> {
    fn eval(&self, r: f64, _: f64, _: f64) -> Result<f64> {
        Ok((self.0)(r))
    }

    fn depends_on_solution(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarRadialSolution {
    pub profile: RadialProfile,
    pub iterations: usize,
    /// Final relative L∞ change of the fixed point.
    pub change: f64,
    /// `max |u″(u′/r)^{n−1} − g|` over interior nodes.
    pub residual: f64,
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let d = new.iter().zip(old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let s = new.iter().map(|a| a.abs()).fold(0.0, f64::max);
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).fold(0.0, f64::max)
}

fn eval_source(src: &dyn RadialSource, r: &[f64], u: &[f64], du: &[f64]) -> Result<Vec<f64>> {
    let g = r
        .iter()
        .zip(u)
        .zip(du)
        .map(|((&r, &u), &d)| src.eval(r, u, d))
        .collect::<Result<Vec<f64>>>()?;
    // the boundary node may vanish, as for sources that read −u
    let last = g.len() - 1;
    let bad = |k: usize, v: f64| !v.is_finite() || if k < last { !(v > 0.0) } else { v < 0.0 };
    if let Some((k, v)) = g.iter().enumerate().find(|(k, v)| bad(*k, **v)) {
        return Err(Error::invalid(format!(
            "radial source must be positive and finite inside the ball, got {v} at r = {}",
            r[k]
        )));
    }
    Ok(g)
}

/// Interior residual of the radial operator against nodal source values.
pub fn radial_residual(profile: &RadialProfile, g: &[f64]) -> f64 {
    (1..profile.len() - 1)
        .map(|k| (radial_ma_operator(profile, k) - g[k]).abs())
        .fold(0.0, f64::max)
}

/// Solves `det D²u = g(r, u, u′)` on the ball of radius `radius` with
/// `u = c` on the boundary. Sources that read the solution are handled by
/// damped fixed-point iteration started from `c + (r² − R²)/2`.
pub fn solve_scalar_radial(
    g: &dyn RadialSource,
    n: usize,
    radius: f64,
    c: f64,
    opts: &RadialOptions,
) -> Result<ScalarRadialSolution> {
    opts.validate()?;
    if n < 1 || !(radius > 0.0) {
        return Err(Error::invalid("need n ≥ 1 and a positive radius"));
    }
    let r = uniform_grid(radius, opts.grid_size);
    let mut u: Vec<f64> = r.iter().map(|x| c + 0.5 * (x * x - radius * radius)).collect();
    let mut du: Vec<f64> = r.clone();
    let mut history = Vec::new();
    let iterative = g.depends_on_solution();
    for it in 0..opts.max_iter {
        let gv = eval_source(g, &r, &u, &du)?;
        let (tu, tdu) = integrate_source(n, &r, &gv, c);
        let change = rel_change(&tu, &u);
        history.push(change);
        if !iterative || change <= opts.tol {
            let profile = RadialProfile {
                n,
                radius,
                boundary_value: c,
                r: r.clone(),
                u: tu,
                du: tdu,
            };
            let gv = eval_source(g, &r, &profile.u, &profile.du)?;
            let residual = radial_residual(&profile, &gv);
            return Ok(ScalarRadialSolution {
                profile,
                iterations: it + 1,
                change,
                residual,
            });
        }
        let w = if it == 0 { 1.0 } else { opts.damping };
        for k in 0..u.len() {
            u[k] = (1.0 - w) * u[k] + w * tu[k];
            du[k] = (1.0 - w) * du[k] + w * tdu[k];
        }
    }
    Err(Error::Divergence(DivergenceReport {
        solver: "scalar radial fixed point".into(),
        reason: format!("relative change above {} after the iteration cap", opts.tol),
        iterations: opts.max_iter,
        history,
    }))
}

/// Direction of the norm drift that signals absence of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    ToZero,
    ToInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRadialSolution {
    pub profiles: [RadialProfile; 2],
    pub iterations: usize,
    pub change: f64,
    /// Interior residuals of both equations under the radial operator.
    pub residuals: [f64; 2],
    /// True when the pair was found by the scale-corrected iteration.
    pub scale_corrected: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSolutionReport {
    pub drift: Drift,
    pub iterations: usize,
    /// `log ‖u¹‖∞` sampled every 50 iterations.
    pub log_norm_history: Vec<f64>,
    /// The iterates were checked to carry the one-parameter family
    /// `(t u¹, t^{n/α} u²)` of the coupled map.
    pub scaling_family_verified: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CoupledOutcome {
    Solution(Box<CoupledRadialSolution>),
    NoSolution(NoSolutionReport),
}

impl CoupledOutcome {
    pub fn solution(&self) -> Option<&CoupledRadialSolution> {
        match self {
            CoupledOutcome::Solution(s) => Some(s),
            CoupledOutcome::NoSolution(_) => None,
        }
    }

    pub fn is_solution(&self) -> bool {
        self.solution().is_some()
    }
}

/// The radial power-coupled system
/// `det D²u¹ = (−u²)^α`, `det D²u² = (−u¹)^β`, `u¹ = u² = 0` on `|x| = R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSystem {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub radius: f64,
}

const DRIFT_EVERY: usize = 50;
const DRIFT_WINDOW: usize = 500;

impl PowerSystem {
    pub fn new(alpha: f64, beta: f64, n: usize, radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("α and β must be positive"));
        }
        if n < 1 || !(radius > 0.0) {
            return Err(Error::invalid("need n ≥ 1 and a positive radius"));
        }
        Ok(PowerSystem { alpha, beta, n, radius })
    }

    /// Homogeneity degree `αβ/n²` of the composite map `u¹ ↦ u¹`.
    pub fn kappa(&self) -> f64 {
        self.alpha * self.beta / (self.n * self.n) as f64
    }

    pub fn is_critical(&self) -> bool {
        (self.alpha * self.beta - (self.n * self.n) as f64).abs() <= 1e-9
    }

    /// Image of the source `(−v)^e` under the radial solve with zero data.
    fn solve_from(&self, r: &[f64], v: &[f64], e: f64) -> (Vec<f64>, Vec<f64>) {
        let g: Vec<f64> = v.iter().map(|x| (-x).max(0.0).powf(e)).collect();
        integrate_source(self.n, r, &g, 0.0)
    }

    /// One application of both equations: `(S((−u²)^α), S((−u¹)^β))`.
    pub fn pair_map(&self, r: &[f64], u1: &[f64], u2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.solve_from(r, u2, self.alpha).0, self.solve_from(r, u1, self.beta).0)
    }

    /// Checks `T(t u¹, t^{n/α} u²) = (t T¹, t^{n/α} T²)` for a few `t`.
    fn scaling_family_holds(&self, r: &[f64], u1: &[f64], u2: &[f64]) -> bool {
        let (t1, t2) = self.pair_map(r, u1, u2);
        [0.5f64, 2.0, 10.0].iter().all(|&t| {
            let s = t.powf(self.n as f64 / self.alpha);
            let a: Vec<f64> = u1.iter().map(|x| t * x).collect();
            let b: Vec<f64> = u2.iter().map(|x| s * x).collect();
            let (m1, m2) = self.pair_map(r, &a, &b);
            let e1: Vec<f64> = t1.iter().map(|x| t * x).collect();
            let e2: Vec<f64> = t2.iter().map(|x| s * x).collect();
            rel_change(&m1, &e1) <= 1e-9 && rel_change(&m2, &e2) <= 1e-9
        })
    }

    fn finish(
        &self,
        r: &[f64],
        u1: Vec<f64>,
        u2: Vec<f64>,
        iterations: usize,
        change: f64,
        scale_corrected: bool,
        warnings: Vec<String>,
    ) -> CoupledRadialSolution {
        let (_, du1) = self.solve_from(r, &u2, self.alpha);
        let (_, du2) = self.solve_from(r, &u1, self.beta);
        let mk = |u: Vec<f64>, du: Vec<f64>| RadialProfile {
            n: self.n,
            radius: self.radius,
            boundary_value: 0.0,
            r: r.to_vec(),
            u,
            du,
        };
        let g1: Vec<f64> = u2.iter().map(|x| (-x).max(0.0).powf(self.alpha)).collect();
        let g2: Vec<f64> = u1.iter().map(|x| (-x).max(0.0).powf(self.beta)).collect();
        let p1 = mk(u1, du1);
        let p2 = mk(u2, du2);
        let residuals = [radial_residual(&p1, &g1), radial_residual(&p2, &g2)];
        CoupledRadialSolution {
            profiles: [p1, p2],
            iterations,
            change,
            residuals,
            scale_corrected,
            warnings,
        }
    }

    /// Solves the radial system.
    ///
    /// For `αβ < n²` and `αβ = n²` this is the alternating damped iteration
    /// (freeze `u²`, solve for `u¹`, then the converse). Its norm drifts
    /// geometrically when no fixed point exists, which the drift detector
    /// reports as [`CoupledOutcome::NoSolution`]. For `αβ > n²` the fixed
    /// point is repelling for that iteration, so the shape `u¹/‖u¹‖` is
    /// iterated instead and the amplitude is recovered from homogeneity.
    pub fn solve(&self, opts: &RadialOptions, init: Option<(&[f64], &[f64])>) -> Result<CoupledOutcome> {
        opts.validate()?;
        let r = uniform_grid(self.radius, opts.grid_size);
        let (u1, u2) = match init {
            Some((a, b)) => {
                if a.len() != r.len() || b.len() != r.len() {
                    return Err(Error::invalid("initial profiles must match the radius grid"));
                }
                (a.to_vec(), b.to_vec())
            }
            None => {
                let p: Vec<f64> = r.iter().map(|x| x * x - self.radius * self.radius).collect();
                (p.clone(), p)
            }
        };
        if u1[..u1.len() - 1].iter().chain(&u2[..u2.len() - 1]).any(|x| !(*x < 0.0)) {
            return Err(Error::invalid("initial profiles must be negative inside the ball"));
        }
        let mut warnings = Vec::new();
        if self.is_critical() {
            warnings.push(format!(
                "αβ = {} is within 1e-9 of n² = {}: no radial convex solution is expected",
                self.alpha * self.beta,
                self.n * self.n
            ));
        } else if self.kappa() > 1.0 {
            warnings.push("αβ > n²: existence is expected but uniqueness is not; this is a solution".into());
        }
        if self.kappa() > 1.0 && !self.is_critical() {
            return self.solve_scaled(opts, &r, u1, warnings);
        }
        self.solve_alternating(opts, &r, u1, u2, warnings)
    }

    fn solve_alternating(
        &self,
        opts: &RadialOptions,
        r: &[f64],
        mut u1: Vec<f64>,
        mut u2: Vec<f64>,
        warnings: Vec<String>,
    ) -> Result<CoupledOutcome> {
        let mut history = Vec::new();
        let mut log_norms = Vec::new();
        let mut family_checked = false;
        let mut family_ok = false;
        for it in 0..opts.max_iter {
            let w = if it == 0 { 1.0 } else { opts.damping };
            let (t1, _) = self.solve_from(r, &u2, self.alpha);
            let n1: Vec<f64> = u1.iter().zip(&t1).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let (t2, _) = self.solve_from(r, &n1, self.beta);
            let n2: Vec<f64> = u2.iter().zip(&t2).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let change = rel_change(&n1, &u1).max(rel_change(&n2, &u2));
            history.push(change);
            u1 = n1;
            u2 = n2;
            let norm = sup_norm(&u1);
            if change <= opts.tol && norm > 0.0 {
                let sol = self.finish(r, u1, u2, it + 1, change, false, warnings);
                return Ok(CoupledOutcome::Solution(Box::new(sol)));
            }
            if (it + 1) % DRIFT_EVERY == 0 || norm == 0.0 || !norm.is_finite() || !(1e-200..=1e200).contains(&norm) {
                log_norms.push(norm.ln());
                if !family_checked && norm > 0.0 && norm.is_finite() {
                    family_checked = true;
                    family_ok = self.scaling_family_holds(r, &u1, &u2);
                }
                let window = DRIFT_WINDOW / DRIFT_EVERY;
                let degenerate = !(1e-200..=1e200).contains(&norm) || !norm.is_finite();
                if log_norms.len() > window || degenerate {
                    let tail = &log_norms[log_norms.len().saturating_sub(window + 1)..];
                    let steps: Vec<f64> = tail.windows(2).map(|p| p[1] - p[0]).collect();
                    let down = steps.iter().all(|d| *d < 0.0);
                    let up = steps.iter().all(|d| *d > 0.0);
                    if down || up || degenerate {
                        let drift = if norm < 1.0 || (down && !degenerate) {
                            Drift::ToZero
                        } else {
                            Drift::ToInfinity
                        };
                        return Ok(CoupledOutcome::NoSolution(NoSolutionReport {
                            drift,
                            iterations: it + 1,
                            log_norm_history: log_norms,
                            scaling_family_verified: family_ok,
                            warnings,
                        }));
                    }
                }
            }
        }
        Err(Error::Divergence(DivergenceReport {
            solver: "coupled radial alternating iteration".into(),
            reason: "no convergence and no sustained norm drift".into(),
            iterations: opts.max_iter,
            history,
        }))
    }

    fn solve_scaled(
        &self,
        opts: &RadialOptions,
        r: &[f64],
        u1: Vec<f64>,
        warnings: Vec<String>,
    ) -> Result<CoupledOutcome> {
        let kappa = self.kappa();
        let nrm = sup_norm(&u1);
        let mut phi: Vec<f64> = u1.iter().map(|x| x / nrm).collect();
        let mut scale_prev: Option<f64> = None;
        let mut history = Vec::new();
        for it in 0..opts.max_iter {
            let (w2, _) = self.solve_from(r, &phi, self.beta);
            let (t, _) = self.solve_from(r, &w2, self.alpha);
            let nt = sup_norm(&t);
            let w = if it == 0 { 1.0 } else { opts.damping };
            let mut next: Vec<f64> = phi.iter().zip(&t).map(|(a, b)| (1.0 - w) * a + w * b / nt).collect();
            let nn = sup_norm(&next);
            next.iter_mut().for_each(|x| *x /= nn);
            let scale = nt.powf(1.0 / (1.0 - kappa));
            let mut change = rel_change(&next, &phi);
            if let Some(sp) = scale_prev {
                change = change.max((scale - sp).abs() / scale);
            }
            history.push(change);
            phi = next;
            scale_prev = Some(scale);
            if change <= opts.tol {
                let u1: Vec<f64> = phi.iter().map(|x| scale * x).collect();
                let (u2, _) = self.solve_from(r, &u1, self.beta);
                let (u1b, _) = self.solve_from(r, &u2, self.alpha);
                let sol = self.finish(r, u1b, u2, it + 1, change, true, warnings);
                return Ok(CoupledOutcome::Solution(Box::new(sol)));
            }
        }
        Err(Error::Divergence(DivergenceReport {
            solver: "coupled radial scale-corrected iteration".into(),
            reason: "shape iteration did not settle".into(),
            iterations: opts.max_iter,
            history,
        }))
    }
}

/// Convenience wrapper for [`PowerSystem::solve`].
pub fn solve_coupled_radial(
    alpha: f64,
    beta: f64,
    n: usize,
    radius: f64,
    opts: &RadialOptions,
    init: Option<(&[f64], &[f64])>,
) -> Result<CoupledOutcome> {
    PowerSystem::new(alpha, beta, n, radius)?.solve(opts, init)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResult {
    pub scale: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_values: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub starts: Vec<StartResult>,
    /// Largest pairwise `max(‖u¹_a − u¹_b‖∞, ‖u²_a − u²_b‖∞)` over converged starts.
    pub max_pairwise_distance: Option<f64>,
    /// Uniqueness is only predicted for `αβ < n²`.
    pub uniqueness_predicted: bool,
    pub note: String,
}

/// Starts the coupled solver from `n_starts` multiples `10^{−2} … 10^{2}` of
/// the parabola `r² − R²` and compares the limits.
pub fn uniqueness_probe(
    alpha: f64,
    beta: f64,
    n: usize,
    radius: f64,
    n_starts: usize,
    opts: &RadialOptions,
) -> Result<UniquenessReport> {
    let sys = PowerSystem::new(alpha, beta, n, radius)?;
    if n_starts == 0 {
        return Err(Error::invalid("need at least one start"));
    }
    let r = uniform_grid(radius, opts.grid_size);
    let scales: Vec<f64> = (0..n_starts)
        .map(|k| {
            let t = if n_starts == 1 { 0.5 } else { k as f64 / (n_starts - 1) as f64 };
            10f64.powf(-2.0 + 4.0 * t)
        })
        .collect();
    let runs = par::map_slice(&scales, |&s| {
        let p: Vec<f64> = r.iter().map(|x| s * (x * x - radius * radius)).collect();
        sys.solve(opts, Some((&p, &p)))
    });
    let mut starts = Vec::new();
    let mut limits: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (s, run) in scales.iter().zip(runs) {
        match run {
            Ok(CoupledOutcome::Solution(sol)) => {
                starts.push(StartResult {
                    scale: *s,
                    converged: true,
                    center_values: Some([sol.profiles[0].u[0], sol.profiles[1].u[0]]),
                    error: None,
                });
                let [a, b] = sol.profiles;
                limits.push((a.u, b.u));
            }
            Ok(CoupledOutcome::NoSolution(rep)) => starts.push(StartResult {
                scale: *s,
                converged: false,
                center_values: None,
                error: Some(format!("no solution: drift {:?}", rep.drift)),
            }),
            Err(e) => starts.push(StartResult {
                scale: *s,
                converged: false,
                center_values: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let mut max_d: Option<f64> = None;
    for a in 0..limits.len() {
        for b in a + 1..limits.len() {
            let d = max_abs_diff(&limits[a].0, &limits[b].0).max(max_abs_diff(&limits[a].1, &limits[b].1));
            max_d = Some(max_d.map_or(d, |m| m.max(d)));
        }
    }
    if limits.len() == 1 {
        max_d = Some(0.0);
    }
    let predicted = sys.kappa() < 1.0 && !sys.is_critical();
    let note = if predicted {
        "αβ < n²: a unique radial convex solution is expected".to_string()
    } else if sys.is_critical() {
        "αβ = n²: no radial convex solution is expected".to_string()
    } else {
        "αβ > n²: existence is expected, uniqueness is not claimed; distances are informational".to_string()
    };
    Ok(UniquenessReport {
        alpha,
        beta,
        n,
        starts,
        max_pairwise_distance: max_d,
        uniqueness_predicted: predicted,
        note,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// CSV with columns `r,u1,du1[,u2,du2]`; floats use shortest round-trip form.
pub fn profiles_csv(profiles: &[&RadialProfile]) -> String {
    let mut s = String::from("r");
    for i in 1..=profiles.len() {
        let _ = write!(s, ",u{i},du{i}");
    }
    s.push('\n');
    if let Some(first) = profiles.first() {
        for k in 0..first.len() {
            let _ = write!(s, "{}", first.r[k]);
            for p in profiles {
                let _ = write!(s, ",{},{}", p.u[k], p.du[k]);
            }
            s.push('\n');
        }
    }
    s
}
