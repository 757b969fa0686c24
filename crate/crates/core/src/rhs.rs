//! Right-hand sides `f = (f¹, …, f^m)` of the coupled system and the
//! difference quotients `d_ij` built from them.
//!
//! Component and variable indices are zero-based in this API; expression
//! text uses one-based names (`z1`, `p2`, …).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{BinaryOp, Expr, ExprSpec, UnaryOp, Var};

/// Optional decomposition `fⁱ = f^{i,1} + f^{i,2}`: the first part locally
/// Lipschitz in `zⁱ`, the second non-increasing in `zⁱ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub lipschitz_part: ExprSpec,
    pub monotone_part: ExprSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub f: ExprSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    /// Declared Lipschitz constant of the first split part in `zⁱ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_z: Option<f64>,
    /// Declared Lipschitz constant in `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsSpec {
    /// Spatial dimension `n`.
    pub dim: usize,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
struct Component {
    f: Expr,
    split: Option<(Expr, Expr)>,
    lipschitz_z: Option<f64>,
    lipschitz_p: Option<f64>,
}

/// Parsed, immutable right-hand side system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RhsSpec", into = "RhsSpec")]
pub struct RhsSystem {
    spec: RhsSpec,
    comps: Vec<Component>,
}

impl PartialEq for RhsSystem {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl From<RhsSystem> for RhsSpec {
    fn from(s: RhsSystem) -> Self {
        s.spec
    }
}

impl TryFrom<RhsSpec> for RhsSystem {
    type Error = Error;

    fn try_from(spec: RhsSpec) -> Result<Self> {
        let n = spec.dim;
        let m = spec.components.len();
        if n < 1 || m < 1 {
            return Err(Error::Configuration("rhs system needs dim ≥ 1 and at least one component".into()));
        }
        let check = |e: &Expr| -> Result<()> {
            let (ax, az, ap) = e.arity();
            if ax > n || ap > n || az > m {
                return Err(Error::Configuration(format!(
                    "expression `{e}` refers to variables beyond x1..x{n}, z1..z{m}, p1..p{n}"
                )));
            }
            Ok(())
        };
        let mut comps = Vec::with_capacity(m);
        for c in &spec.components {
            let f = c.f.resolve(&spec.params)?;
            check(&f)?;
            let split = match &c.split {
                Some(s) => {
                    let a = s.lipschitz_part.resolve(&spec.params)?;
                    let b = s.monotone_part.resolve(&spec.params)?;
                    check(&a)?;
                    check(&b)?;
                    Some((a, b))
                }
                None => None,
            };
            for l in [c.lipschitz_z, c.lipschitz_p].into_iter().flatten() {
                if !(l >= 0.0) || !l.is_finite() {
                    return Err(Error::Configuration("declared Lipschitz constants must be finite and ≥ 0".into()));
                }
            }
            comps.push(Component {
                f,
                split,
                lipschitz_z: c.lipschitz_z,
                lipschitz_p: c.lipschitz_p,
            });
        }
        Ok(RhsSystem { spec, comps })
    }
}

/// Which part of a component to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    Lipschitz,
    Monotone,
}

const LIPSCHITZ_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

impl RhsSystem {
    pub fn from_spec(spec: RhsSpec) -> Result<Self> {
        spec.try_into()
    }

    /// `fⁱ = (−z^{i+1})^{exponent_i}` cyclically: for two components this is
    /// `det D²u¹ = (−u²)^α`, `det D²u² = (−u¹)^β`. The split puts everything in
    /// the monotone part.
    pub fn power_coupled(alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("exponents must be positive"));
        }
        let mut params = BTreeMap::new();
        params.insert("alpha".to_string(), alpha);
        params.insert("beta".to_string(), beta);
        let comp = |f: &str| ComponentSpec {
            f: f.into(),
            split: Some(SplitSpec {
                lipschitz_part: "0".into(),
                monotone_part: f.into(),
            }),
            lipschitz_z: None,
            lipschitz_p: None,
        };
        RhsSpec {
            dim,
            components: vec![comp("(-z2)^alpha"), comp("(-z1)^beta")],
            params,
        }
        .try_into()
    }

    /// `fⁱ ≡ value` for `m` components.
    pub fn constant(value: f64, m: usize, dim: usize) -> Result<Self> {
        let comp = ComponentSpec {
            f: ExprSpec::Ast(Expr::constant(value)),
            split: Some(SplitSpec {
                lipschitz_part: ExprSpec::Ast(Expr::constant(0.0)),
                monotone_part: ExprSpec::Ast(Expr::constant(value)),
            }),
            lipschitz_z: None,
            lipschitz_p: None,
        };
        RhsSpec {
            dim,
            components: vec![comp; m],
            params: BTreeMap::new(),
        }
        .try_into()
    }

    pub fn spec(&self) -> &RhsSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn has_split(&self, i: usize) -> bool {
        self.comps.get(i).is_some_and(|c| c.split.is_some())
    }

    pub fn expr(&self, i: usize) -> &Expr {
        &self.comps[i].f
    }

    /// Whether component `i` reads any coordinate, any `p`, or any `z`.
    pub fn depends_on(&self, i: usize) -> (bool, bool, bool) {
        let (x, z, p) = self.comps[i].f.arity();
        (x > 0, z > 0, p > 0)
    }

    fn check_args(&self, i: usize, x: &[f64], z: &[f64], p: &[f64]) -> Result<()> {
        if i >= self.m() {
            return Err(Error::invalid(format!("component index {i} out of range (m = {})", self.m())));
        }
        if x.len() != self.dim() || p.len() != self.dim() || z.len() != self.m() {
            return Err(Error::invalid("argument lengths do not match (n, m)"));
        }
        Ok(())
    }

    /// `fⁱ(x, z, p)`.
    pub fn eval_f(&self, i: usize, x: &[f64], z: &[f64], p: &[f64]) -> Result<f64> {
        self.check_args(i, x, z, p)?;
        self.comps[i].f.eval(x, z, p)
    }

    pub fn eval_part(&self, i: usize, part: Part, x: &[f64], z: &[f64], p: &[f64]) -> Result<f64> {
        self.check_args(i, x, z, p)?;
        let c = &self.comps[i];
        match (part, &c.split) {
            (Part::Full, _) => c.f.eval(x, z, p),
            (Part::Lipschitz, Some((a, _))) => a.eval(x, z, p),
            (Part::Monotone, Some((_, b))) => b.eval(x, z, p),
            _ => Err(Error::Configuration(format!("component {} has no declared split", i + 1))),
        }
    }

    /// Difference quotient of `fⁱ` in `z^j` (of the monotone split part when
    /// `i == j`); exactly zero for `h == 0`.
    pub fn d_ij(&self, i: usize, j: usize, x: &[f64], z: &[f64], p: &[f64], h: f64) -> Result<f64> {
        self.check_args(i, x, z, p)?;
        if j >= self.m() {
            return Err(Error::invalid(format!("component index {j} out of range")));
        }
        let part = if i == j {
            if !self.has_split(i) {
                return Err(Error::Configuration(format!(
                    "d_{0}{0} needs a declared split for component {0}",
                    i + 1
                )));
            }
            Part::Monotone
        } else {
            Part::Full
        };
        if h == 0.0 {
            return Ok(0.0);
        }
        let mut zh = z.to_vec();
        zh[j] += h;
        Ok((self.eval_part(i, part, x, &zh, p)? - self.eval_part(i, part, x, z, p)?) / h)
    }

    /// The matrix `D = (d_ij)` at one point, with step `h_j` in column `j`.
    pub fn d_matrix(&self, x: &[f64], z: &[f64], p: &[f64], h: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.m())
            .map(|i| (0..self.m()).map(|j| self.d_ij(i, j, x, z, p, h[j])).collect())
            .collect()
    }

    /// Local Lipschitz constant of `f^{i,1}` in `zⁱ` at a point: the declared
    /// value, or the largest symmetric difference quotient over the step set.
    pub fn lipschitz_z(&self, i: usize, x: &[f64], z: &[f64], p: &[f64]) -> Result<f64> {
        if let Some(l) = self.comps[i].lipschitz_z {
            return Ok(l);
        }
        let part = if self.has_split(i) { Part::Lipschitz } else { Part::Full };
        let mut best: f64 = 0.0;
        for h in LIPSCHITZ_STEPS {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += h;
            zm[i] -= h;
            let q = (self.eval_part(i, part, x, &zp, p)? - self.eval_part(i, part, x, &zm, p)?) / (2.0 * h);
            best = best.max(q.abs());
        }
        Ok(best)
    }

    /// Local Lipschitz constant of `fⁱ` in `p` (Euclidean norm of the
    /// symmetric difference gradient), or the declared value.
    pub fn lipschitz_p(&self, i: usize, x: &[f64], z: &[f64], p: &[f64]) -> Result<f64> {
        if let Some(l) = self.comps[i].lipschitz_p {
            return Ok(l);
        }
        if !self.depends_on(i).2 {
            return Ok(0.0);
        }
        let mut best: f64 = 0.0;
        for h in LIPSCHITZ_STEPS {
            let mut s = 0.0;
            for k in 0..self.dim() {
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[k] += h;
                pm[k] -= h;
                let q = (self.eval_f(i, x, z, &pp)? - self.eval_f(i, x, z, &pm)?) / (2.0 * h);
                s += q * q;
            }
            best = best.max(s.sqrt());
        }
        Ok(best)
    }

    /// Symbolic marker used by solvers: true when `fⁱ` is `(−z^j)^a` for a
    /// constant exponent. Returns `(j, a)`.
    pub fn as_power_coupling(&self, i: usize) -> Option<(usize, f64)> {
        match &self.comps.get(i)?.f {
            Expr::Binary {
                op: BinaryOp::Pow,
                lhs,
                rhs,
            } => match (lhs.as_ref(), rhs.as_ref()) {
                (
                    Expr::Unary {
                        op: UnaryOp::Neg,
                        arg,
                    },
                    Expr::Const(a),
                ) => match arg.as_ref() {
                    Expr::Var(Var::Z(j)) => Some((*j, *a)),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }
}
