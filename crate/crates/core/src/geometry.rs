//! Bounded domains, reflections through hyperplanes and the critical plane
//! positions of the moving-plane method.
//!
//! A hyperplane is `T = {x : x·ν = λ}` for a unit direction `ν`. The cap
//! `Σ_λ = {x ∈ Ω : x·ν < λ}` is reflected through `T`; the procedure starts
//! at the first-touch position `λ₀ = inf_Ω x·ν` and may run until the
//! reflected cap leaves the domain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprSpec};
use crate::grid::Grid2;

const UNIT_TOL: f64 = 1e-12;

/// Smooth domain `{φ < 0}` given by a level function and its gradient.
///
/// The gradient is supplied by the user; it is only used for boundary
/// normals, never differentiated numerically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LevelSetSpec", into = "LevelSetSpec")]
pub struct LevelSet {
    spec: LevelSetSpec,
    level: Expr,
    gradient: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetSpec {
    pub level: ExprSpec,
    pub gradient: Vec<ExprSpec>,
    pub bbox_min: Vec<f64>,
    pub bbox_max: Vec<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl TryFrom<LevelSetSpec> for LevelSet {
    type Error = Error;

    fn try_from(spec: LevelSetSpec) -> Result<Self> {
        let n = spec.bbox_min.len();
        if n < 1 || spec.bbox_max.len() != n || spec.gradient.len() != n {
            return Err(Error::Configuration(
                "level set needs matching bbox_min, bbox_max and gradient dimensions".into(),
            ));
        }
        if spec.bbox_min.iter().zip(&spec.bbox_max).any(|(a, b)| !(a < b)) {
            return Err(Error::Configuration("level set bounding box is empty".into()));
        }
        let level = spec.level.resolve(&spec.params)?;
        let gradient = spec
            .gradient
            .iter()
            .map(|g| g.resolve(&spec.params))
            .collect::<Result<Vec<_>>>()?;
        for e in std::iter::once(&level).chain(&gradient) {
            let (nx, nz, np) = e.arity();
            if nx > n || nz > 0 || np > 0 {
                return Err(Error::Configuration(format!(
                    "level set expression `{e}` may only use x1..x{n}"
                )));
            }
        }
        Ok(LevelSet { spec, level, gradient })
    }
}

impl From<LevelSet> for LevelSetSpec {
    fn from(l: LevelSet) -> Self {
        l.spec
    }
}

impl PartialEq for LevelSet {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl LevelSet {
    pub fn new(level: &str, gradient: &[&str], bbox_min: Vec<f64>, bbox_max: Vec<f64>) -> Result<Self> {
        LevelSetSpec {
            level: level.into(),
            gradient: gradient.iter().map(|g| (*g).into()).collect(),
            bbox_min,
            bbox_max,
            params: BTreeMap::new(),
        }
        .try_into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    /// `Ω' × (−H, H)`, axis along the last coordinate.
    Tube {
        cross_section: Box<Domain>,
        half_height: f64,
    },
    LevelSet(LevelSet),
}

/// Boundary sample with its outward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

pub fn check_unit(nu: &[f64]) -> Result<()> {
    let n = norm(nu);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!("direction must be a unit vector, |ν| = {n}")));
    }
    Ok(())
}

/// Mirror image `x + 2(λ − x·ν)ν` of `x` through the plane `{x·ν = λ}`.
pub fn reflect_point(x: &[f64], nu: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_unit(nu)?;
    if x.len() != nu.len() {
        return Err(Error::invalid("point and direction dimensions differ"));
    }
    Ok(reflect_unchecked(x, nu, lambda))
}

#[inline]
pub(crate) fn reflect_unchecked(x: &[f64], nu: &[f64], lambda: f64) -> Vec<f64> {
    let s = 2.0 * (lambda - dot(x, nu));
    x.iter().zip(nu).map(|(xi, ni)| xi + s * ni).collect()
}

/// Reflects a direction (no translation part).
pub(crate) fn reflect_vector(v: &[f64], nu: &[f64]) -> Vec<f64> {
    let s = 2.0 * dot(v, nu);
    v.iter().zip(nu).map(|(vi, ni)| vi - s * ni).collect()
}

/// Some unit vector orthogonal to `nu`.
fn orthogonal_to(nu: &[f64]) -> Vec<f64> {
    let n = nu.len();
    let k = (0..n)
        .min_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs()))
        .unwrap_or(0);
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    let s = dot(&e, nu);
    normalized(e.iter().zip(nu).map(|(ei, ni)| ei - s * ni).collect())
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Domain::Ball { center, radius }
    }

    pub fn unit_disk() -> Self {
        Domain::ball(vec![0.0, 0.0], 1.0)
    }

    pub fn ellipse(center: Vec<f64>, semi_axes: Vec<f64>) -> Self {
        Domain::Ellipse { center, semi_axes }
    }

    pub fn tube(cross_section: Domain, half_height: f64) -> Self {
        Domain::Tube {
            cross_section: Box::new(cross_section),
            half_height,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Ellipse { center, .. } => center.len(),
            Domain::Tube { cross_section, .. } => cross_section.dim() + 1,
            Domain::LevelSet(l) => l.spec.bbox_min.len(),
        }
    }

    /// Checks parameters; top-level domains must have dimension ≥ 2.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner()?;
        if self.dim() < 2 {
            return Err(Error::invalid("domain dimension must be at least 2"));
        }
        Ok(())
    }

    fn validate_inner(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Domain::Ball { center, radius } => {
                if center.is_empty() || !finite(center) || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid("ball needs a finite center and positive radius"));
                }
            }
            Domain::Ellipse { center, semi_axes } => {
                if center.is_empty()
                    || center.len() != semi_axes.len()
                    || !finite(center)
                    || semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite())
                {
                    return Err(Error::invalid(
                        "ellipse needs matching center/semi_axes with positive axes",
                    ));
                }
            }
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                if !(*half_height > 0.0) || !half_height.is_finite() {
                    return Err(Error::invalid("tube half_height must be positive"));
                }
                if matches!(**cross_section, Domain::Tube { .. }) {
                    return Err(Error::invalid("nested tubes are not supported"));
                }
                cross_section.validate_inner()?;
            }
            Domain::LevelSet(_) => {}
        }
        Ok(())
    }

    /// Level function, negative inside. Distance-like for balls and tubes.
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d.sqrt() - radius
            }
            Domain::Ellipse { center, semi_axes } => {
                let q: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((a, c), s)| ((a - c) / s).powi(2))
                    .sum();
                let amin = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                (q.sqrt() - 1.0) * amin
            }
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                let n = x.len();
                let a = cross_section.level(&x[..n - 1]);
                let b = x[n - 1].abs() - half_height;
                a.max(b)
            }
            // evaluation failures are reported as "outside"
            Domain::LevelSet(l) => l.level.eval(x, &[], &[]).unwrap_or(f64::INFINITY),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 0.0
    }

    /// Outward unit normal direction of the level function at `x`.
    pub fn normal(&self, x: &[f64]) -> Vec<f64> {
        let g = match self {
            Domain::Ball { center, .. } => x.iter().zip(center).map(|(a, c)| a - c).collect(),
            Domain::Ellipse { center, semi_axes } => x
                .iter()
                .zip(center)
                .zip(semi_axes)
                .map(|((a, c), s)| (a - c) / (s * s))
                .collect(),
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                let n = x.len();
                let a = cross_section.level(&x[..n - 1]);
                let b = x[n - 1].abs() - half_height;
                if a >= b {
                    let mut g = cross_section.normal(&x[..n - 1]);
                    g.push(0.0);
                    g
                } else {
                    let mut g = vec![0.0; n];
                    g[n - 1] = x[n - 1].signum();
                    g
                }
            }
            Domain::LevelSet(l) => l
                .gradient
                .iter()
                .map(|e| e.eval(x, &[], &[]).unwrap_or(0.0))
                .collect(),
        };
        normalized(g)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Ellipse { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                let (mut lo, mut hi) = cross_section.bounding_box();
                lo.push(-half_height);
                hi.push(*half_height);
                (lo, hi)
            }
            Domain::LevelSet(l) => (l.spec.bbox_min.clone(), l.spec.bbox_max.clone()),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// A point strictly inside the domain, used as the ray-casting origin.
    pub fn interior_point(&self) -> Vec<f64> {
        match self {
            Domain::Ball { center, .. } | Domain::Ellipse { center, .. } => center.clone(),
            Domain::Tube { cross_section, .. } => {
                let mut p = cross_section.interior_point();
                p.push(0.0);
                p
            }
            Domain::LevelSet(_) => {
                let (lo, hi) = self.bounding_box();
                let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
                if self.contains(&mid) {
                    return mid;
                }
                // coarse search for the deepest lattice point
                let n = lo.len();
                let k = 33usize;
                let mut best = (f64::INFINITY, mid.clone());
                for flat in 0..k.pow(n as u32) {
                    let mut idx = flat;
                    let p: Vec<f64> = (0..n)
                        .map(|d| {
                            let t = (idx % k) as f64 / (k - 1) as f64;
                            idx /= k;
                            lo[d] + t * (hi[d] - lo[d])
                        })
                        .collect();
                    let v = self.level(&p);
                    if v < best.0 {
                        best = (v, p);
                    }
                }
                best.1
            }
        }
    }

    /// Parameter `t ∈ (0, 1]` where the segment `a → b` (a inside, b outside)
    /// crosses the boundary.
    pub fn crossing(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
                let ac: Vec<f64> = a.iter().zip(center).map(|(p, c)| p - c).collect();
                quadratic_exit(dot(&d, &d), dot(&d, &ac), dot(&ac, &ac) - radius * radius)
            }
            Domain::Ellipse { center, semi_axes } => {
                let d: Vec<f64> = a.iter().zip(b).zip(semi_axes).map(|((p, q), s)| (q - p) / s).collect();
                let ac: Vec<f64> = a
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((p, c), s)| (p - c) / s)
                    .collect();
                quadratic_exit(dot(&d, &d), dot(&d, &ac), dot(&ac, &ac) - 1.0)
            }
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                let n = a.len();
                let mut t: f64 = 1.0;
                if cross_section.level(&b[..n - 1]) >= 0.0 {
                    t = t.min(cross_section.crossing(&a[..n - 1], &b[..n - 1]));
                }
                let (an, bn) = (a[n - 1], b[n - 1]);
                if bn.abs() >= *half_height {
                    let target = half_height * bn.signum();
                    t = t.min((target - an) / (bn - an));
                }
                t.clamp(0.0, 1.0)
            }
            Domain::LevelSet(_) => {
                let (mut lo, mut hi) = (0.0, 1.0);
                let mut p = a.to_vec();
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    for (k, pk) in p.iter_mut().enumerate() {
                        *pk = a[k] + mid * (b[k] - a[k]);
                    }
                    if self.level(&p) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Boundary point hit by the ray from the interior point along `dir`.
    pub fn ray_boundary(&self, dir: &[f64]) -> Vec<f64> {
        let o = self.interior_point();
        let far = 2.0 * self.diameter() + 1.0;
        let b: Vec<f64> = o.iter().zip(dir).map(|(p, d)| p + far * d).collect();
        let t = self.crossing(&o, &b);
        o.iter().zip(&b).map(|(p, q)| p + t * (q - p)).collect()
    }

    /// `inf_Ω x·ν`. Homogeneous in `ν`, so non-unit vectors are accepted.
    pub fn support_min(&self, nu: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => dot(center, nu) - radius * norm(nu),
            Domain::Ellipse { center, semi_axes } => {
                let s: f64 = semi_axes.iter().zip(nu).map(|(a, v)| (a * v).powi(2)).sum();
                dot(center, nu) - s.sqrt()
            }
            Domain::Tube {
                cross_section,
                half_height,
            } => {
                let n = nu.len();
                cross_section.support_min(&nu[..n - 1]) - half_height * nu[n - 1].abs()
            }
            Domain::LevelSet(_) => {
                let spacing = self.diameter() / 8192.0;
                self.boundary_samples(spacing)
                    .iter()
                    .map(|b| dot(&b.point, nu))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Boundary points at roughly `spacing` arc length apart, by ray casting
    /// from the interior point. Valid for star-shaped (in particular convex)
    /// domains.
    pub fn boundary_samples(&self, spacing: f64) -> Vec<BoundaryPoint> {
        let n = self.dim();
        let diam = self.diameter();
        let dirs: Vec<Vec<f64>> = match n {
            1 => vec![vec![-1.0], vec![1.0]],
            2 => {
                let count = ((std::f64::consts::PI * diam / spacing).ceil() as usize).clamp(64, 1 << 18);
                let count = count.div_ceil(8) * 8;
                (0..count)
                    .map(|k| {
                        let th = std::f64::consts::TAU * k as f64 / count as f64 + std::f64::consts::PI;
                        vec![th.cos(), th.sin()]
                    })
                    .collect()
            }
            _ => {
                let r = 0.5 * diam;
                let count = ((4.0 * std::f64::consts::PI * r * r / (spacing * spacing)) as usize)
                    .clamp(256, 200_000);
                fibonacci_sphere(count, n)
            }
        };
        dirs.iter()
            .map(|d| {
                let point = self.ray_boundary(d);
                let normal = self.normal(&point);
                BoundaryPoint { point, normal }
            })
            .collect()
    }

    /// Samples lines parallel to `nu`; every line must meet the domain in at
    /// most one segment.
    pub fn check_convex_in(&self, nu: &[f64]) -> Result<()> {
        check_unit(nu)?;
        let n = self.dim();
        let (lo, hi) = self.bounding_box();
        let diam = self.diameter();
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        // orthonormal complement of nu
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let s = dot(&e, nu);
            let mut v: Vec<f64> = e.iter().zip(nu).map(|(a, b)| a - s * b).collect();
            for b in &basis {
                let s = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
            }
            if norm(&v) > 1e-8 {
                basis.push(normalized(v));
            }
            if basis.len() == n - 1 {
                break;
            }
        }
        let lines_per_axis: usize = if n == 2 { 97 } else { 25 };
        let steps = 801;
        let total = lines_per_axis.pow(basis.len() as u32);
        for flat in 0..total {
            let mut idx = flat;
            let mut base = center.clone();
            for b in &basis {
                let s = ((idx % lines_per_axis) as f64 / (lines_per_axis - 1) as f64 - 0.5) * diam;
                idx /= lines_per_axis;
                base.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
            }
            let mut segments = 0;
            let mut inside = false;
            for k in 0..steps {
                let t = (k as f64 / (steps - 1) as f64 - 0.5) * diam;
                let p: Vec<f64> = base.iter().zip(nu).map(|(x, v)| x + t * v).collect();
                let now = self.contains(&p);
                if now && !inside {
                    segments += 1;
                }
                inside = now;
            }
            if segments > 1 {
                return Err(Error::NotConvex {
                    witness: base,
                    segments,
                });
            }
        }
        Ok(())
    }

    /// Whether `{x·ν = c}` is a symmetry hyperplane, by reflecting boundary samples.
    pub fn is_symmetric_about(&self, nu: &[f64], c: f64, tol: f64) -> bool {
        let spacing = self.diameter() / 2048.0;
        self.boundary_samples(spacing)
            .iter()
            .all(|b| self.level(&reflect_unchecked(&b.point, nu, c)).abs() <= tol)
    }
}

fn quadratic_exit(a: f64, b: f64, c: f64) -> f64 {
    // a t² + 2 b t + c = 0 with c ≤ 0, largest root
    if a == 0.0 {
        return 1.0;
    }
    let disc = (b * b - a * c).max(0.0).sqrt();
    let t = if b >= 0.0 { -c / (b + disc) } else { (disc - b) / a };
    if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        1.0
    }
}

fn fibonacci_sphere(count: usize, n: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * k as f64;
            let mut v = vec![0.0; n];
            v[0] = r * th.cos();
            v[1] = y;
            v[2] = r * th.sin();
            v
        })
        .collect()
}

/// Critical positions of the moving plane along `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPlanes {
    pub direction: Vec<f64>,
    /// `λ₀`: first contact of the plane with the closure of the domain.
    pub lambda0: f64,
    /// `Λ₀`: supremum of positions whose reflected cap stays inside.
    pub cap_lambda0: f64,
    /// `Λ₁`: first internal tangency of the reflected cap away from the plane.
    /// Reported as the far end of the domain when no tangency occurs while the
    /// reflected cap is still inside.
    pub cap_lambda1: f64,
    /// `Λ₂`: first position where the plane meets the boundary orthogonally.
    pub cap_lambda2: f64,
    pub tangency_witness: Option<Vec<f64>>,
    pub orthogonality_witness: Option<Vec<f64>>,
}

/// Locates `λ₀, Λ₀, Λ₁, Λ₂` for `domain` along the unit direction `nu`.
///
/// `resolution` is the boundary sampling spacing used by the sampled parts;
/// bisections run to `1e-9` of the bounding-box diameter. Ball, axis-aligned
/// ellipse and axis-aligned tube cases use closed forms.
pub fn critical_planes(domain: &Domain, nu: &[f64], resolution: f64) -> Result<CriticalPlanes> {
    domain.validate()?;
    check_unit(nu)?;
    if nu.len() != domain.dim() {
        return Err(Error::invalid("direction dimension does not match the domain"));
    }
    if !(resolution > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    domain.check_convex_in(nu)?;
    let lambda0 = domain.support_min(nu);
    let neg: Vec<f64> = nu.iter().map(|v| -v).collect();
    let far = -domain.support_min(&neg);
    let mk = |l0: f64, l1: f64, l2: f64, tw: Option<Vec<f64>>, ow: Option<Vec<f64>>| CriticalPlanes {
        direction: nu.to_vec(),
        lambda0,
        cap_lambda0: l0,
        cap_lambda1: l1,
        cap_lambda2: l2,
        tangency_witness: tw,
        orthogonality_witness: ow,
    };
    let axis = nu.iter().position(|v| (v.abs() - 1.0).abs() <= UNIT_TOL);

    match domain {
        Domain::Ball { center, radius } => {
            let c = dot(center, nu);
            let tw: Vec<f64> = center.iter().zip(nu).map(|(a, v)| a + radius * v).collect();
            let perp = orthogonal_to(nu);
            let ow: Vec<f64> = center.iter().zip(&perp).map(|(a, v)| a + radius * v).collect();
            return Ok(mk(c, c, c, Some(tw), Some(ow)));
        }
        Domain::Ellipse { center, semi_axes } => {
            let c = dot(center, nu);
            if let Some(k) = axis {
                let tw: Vec<f64> = center.iter().zip(nu).map(|(a, v)| a + semi_axes[k] * v).collect();
                let j = if k == 0 { 1 } else { 0 };
                let mut ow = center.clone();
                ow[j] += semi_axes[j];
                return Ok(mk(c, c, c, Some(tw), Some(ow)));
            }
        }
        Domain::Tube {
            cross_section,
            half_height,
        } => {
            let n = nu.len();
            let corner = |cross_point: Vec<f64>| {
                let mut p = cross_point;
                p.push(*half_height);
                p
            };
            if nu[n - 1] == 0.0 && cross_section.dim() >= 1 {
                // plane perpendicular to the cross-section: caps are orthogonal from the start
                let nu_c = &nu[..n - 1];
                let inner = if cross_section.dim() >= 2 {
                    critical_planes(cross_section, nu_c, resolution)?
                } else {
                    // 1-D interval cross-section
                    let lo = cross_section.support_min(nu_c);
                    let hi = -cross_section.support_min(&[-nu_c[0]]);
                    let mid = 0.5 * (lo + hi);
                    CriticalPlanes {
                        direction: nu_c.to_vec(),
                        lambda0: lo,
                        cap_lambda0: mid,
                        cap_lambda1: mid,
                        cap_lambda2: mid,
                        tangency_witness: Some(vec![hi * nu_c[0].signum()]),
                        orthogonality_witness: None,
                    }
                };
                let touch: Vec<f64> = cross_section
                    .boundary_samples(resolution)
                    .into_iter()
                    .min_by(|a, b| dot(&a.point, nu_c).total_cmp(&dot(&b.point, nu_c)))
                    .map(|b| b.point)
                    .unwrap_or_default();
                let tw = inner.tangency_witness.map(|mut p| {
                    p.push(0.0);
                    p
                });
                return Ok(mk(inner.cap_lambda0, inner.cap_lambda1, lambda0, tw, Some(corner(touch))));
            }
            if nu[..n - 1].iter().all(|v| *v == 0.0) {
                let mid = 0.5 * (lambda0 + far);
                let mut tw = cross_section.interior_point();
                tw.push(far * nu[n - 1]);
                // lateral wall is orthogonal to the plane at every position
                let mut ow_lat = cross_section.ray_boundary(&orthogonal_or_unit(cross_section.dim()));
                ow_lat.push(lambda0 * nu[n - 1]);
                return Ok(mk(mid, mid, lambda0, Some(tw), Some(ow_lat)));
            }
        }
        Domain::LevelSet(_) => {}
    }
    generic_planes(domain, nu, resolution, lambda0, far)
}

fn orthogonal_or_unit(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

fn generic_planes(
    domain: &Domain,
    nu: &[f64],
    resolution: f64,
    lambda0: f64,
    far: f64,
) -> Result<CriticalPlanes> {
    let diam = domain.diameter();
    let bis_tol = 1e-9 * diam;
    let samples = domain.boundary_samples(resolution);
    let in_tol = 1e-12 * diam;

    let contained = |lambda: f64| {
        samples.iter().all(|b| {
            dot(&b.point, nu) >= lambda || domain.level(&reflect_unchecked(&b.point, nu, lambda)) <= in_tol
        })
    };
    let cap0 = if contained(far) {
        far
    } else {
        let (mut a, mut b) = (lambda0, far);
        while b - a > bis_tol {
            let m = 0.5 * (a + b);
            if contained(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };

    // Λ₂
    let (cap2, orth_witness) = orthogonality_plane(domain, nu, &samples, resolution, far);

    // Λ₁: internal tangency while the reflected cap is still inside
    let margin = 2.0 * resolution;
    let touch_tol = (1e-7 * diam).max(resolution * resolution);
    let touch = |lambda: f64| -> Option<Vec<f64>> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for b in &samples {
            if dot(&b.point, nu) > lambda - margin {
                continue;
            }
            let r = reflect_unchecked(&b.point, nu, lambda);
            let gap = -domain.level(&r);
            if gap <= touch_tol {
                let rn = reflect_vector(&b.normal, nu);
                let n_here = domain.normal(&r);
                if dot(&rn, &n_here) >= 1.0 - 1e-3 && best.as_ref().is_none_or(|(g, _)| gap < *g) {
                    best = Some((gap, r));
                }
            }
        }
        best.map(|(_, p)| p)
    };
    let steps = 512usize;
    let mut cap1 = far;
    let mut tw = None;
    let mut prev = lambda0;
    for k in 1..=steps {
        let lam = lambda0 + (cap0 - lambda0) * k as f64 / steps as f64;
        if let Some(p) = touch(lam) {
            let (mut a, mut b) = (prev, lam);
            let mut wit = p;
            while b - a > bis_tol {
                let m = 0.5 * (a + b);
                match touch(m) {
                    Some(p) => {
                        b = m;
                        wit = p;
                    }
                    None => a = m,
                }
            }
            cap1 = b;
            tw = Some(wit);
            break;
        }
        prev = lam;
    }

    Ok(CriticalPlanes {
        direction: nu.to_vec(),
        lambda0,
        cap_lambda0: cap0,
        cap_lambda1: cap1,
        cap_lambda2: cap2,
        tangency_witness: tw,
        orthogonality_witness: orth_witness,
    })
}

fn orthogonality_plane(
    domain: &Domain,
    nu: &[f64],
    samples: &[BoundaryPoint],
    resolution: f64,
    far: f64,
) -> (f64, Option<Vec<f64>>) {
    if let Domain::Ellipse { center, semi_axes } = domain {
        // boundary x = c + A s, |s| = 1; orthogonality means s ⟂ A⁻¹ν
        let a_nu: Vec<f64> = semi_axes.iter().zip(nu).map(|(a, v)| a * v).collect();
        let w = normalized(semi_axes.iter().zip(nu).map(|(a, v)| v / a).collect());
        let s = dot(&a_nu, &w);
        let proj: Vec<f64> = a_nu.iter().zip(&w).map(|(x, y)| x - s * y).collect();
        let pn = norm(&proj);
        let dir: Vec<f64> = if pn > 0.0 {
            proj.iter().map(|x| -x / pn).collect()
        } else {
            orthogonal_to(&w)
        };
        let p: Vec<f64> = center
            .iter()
            .zip(semi_axes)
            .zip(&dir)
            .map(|((c, a), d)| c + a * d)
            .collect();
        return (dot(center, nu) - pn, Some(p));
    }
    let n = domain.dim();
    if n == 2 {
        let count = samples.len();
        let angle = |k: f64| std::f64::consts::TAU * k / count as f64 + std::f64::consts::PI;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..count {
            let a = &samples[k];
            let b = &samples[(k + 1) % count];
            let (sa, sb) = (dot(&a.normal, nu), dot(&b.normal, nu));
            if sa == 0.0 || sa * sb < 0.0 {
                let (mut lo, mut hi) = (k as f64, k as f64 + 1.0);
                let mut pt = a.point.clone();
                if sa != 0.0 {
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let th = angle(mid);
                        let p = domain.ray_boundary(&[th.cos(), th.sin()]);
                        let s = dot(&domain.normal(&p), nu);
                        if s * sa > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        pt = p;
                    }
                }
                let v = dot(&pt, nu);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, pt));
                }
            }
        }
        return match best {
            Some((v, p)) => (v, Some(p)),
            None => (far, None),
        };
    }
    let tol = 2.0 * resolution / domain.diameter().max(1e-300);
    samples
        .iter()
        .filter(|b| dot(&b.normal, nu).abs() <= tol)
        .map(|b| (dot(&b.point, nu), b.point.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or((far, None), |(v, p)| (v, Some(p)))
}

/// Node-level view of `Σ_λ` and its reflected image on a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfDomainMask {
    pub in_cap: Vec<bool>,
    /// For each node of the cap: the reflected point, whether it lies inside
    /// the domain, and the node it lands on when it is a lattice point.
    pub reflected: Vec<Option<ReflectedNode>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedNode {
    pub point: [f64; 2],
    pub inside: bool,
    pub node: Option<usize>,
}

impl HalfDomainMask {
    pub fn count(&self) -> usize {
        self.in_cap.iter().filter(|b| **b).count()
    }
}

pub fn half_domain_mask(domain: &Domain, nu: &[f64], lambda: f64, grid: &Grid2) -> Result<HalfDomainMask> {
    check_unit(nu)?;
    if domain.dim() != 2 || nu.len() != 2 {
        return Err(Error::invalid("half-domain masks are computed on 2-D grids"));
    }
    let mut in_cap = vec![false; grid.len()];
    let mut reflected = vec![None; grid.len()];
    for idx in 0..grid.len() {
        let x = grid.coords(idx);
        if dot(&x, nu) < lambda && domain.contains(&x) {
            in_cap[idx] = true;
            let r = reflect_unchecked(&x, nu, lambda);
            let inside = domain.contains(&r);
            let p = [r[0], r[1]];
            let node = if inside { grid.nearest_node(p, 1e-9) } else { None };
            reflected[idx] = Some(ReflectedNode { point: p, inside, node });
        }
    }
    Ok(HalfDomainMask { in_cap, reflected })
}
